#pragma once

// Stack folding, flame graph rendering and the per-function IPC table.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mperf/detail/format.hpp"
#include "mperf/error.hpp"
#include "mperf/sampling.hpp"

namespace mperf {

// ---------------------------------------------------------------------------
// Symbols
// ---------------------------------------------------------------------------

struct SymbolRange {
  std::uint64_t start = 0;
  std::uint64_t end = 0;  // exclusive
  std::string name;
};

/// Sorted, non-overlapping half-open address ranges.
class SymbolMap {
 public:
  SymbolMap() = default;
  explicit SymbolMap(std::vector<SymbolRange> ranges) : ranges_(std::move(ranges)) {
    std::sort(ranges_.begin(), ranges_.end(),
              [](const SymbolRange& a, const SymbolRange& b) { return a.start < b.start; });
    for (std::size_t i = 0; i < ranges_.size(); ++i) {
      if (ranges_[i].end <= ranges_[i].start)
        throw Error(ErrorKind::ParseError, "empty symbol range for " + ranges_[i].name);
      if (i > 0 && ranges_[i].start < ranges_[i - 1].end)
        throw Error(ErrorKind::ParseError,
                    "overlapping symbols " + ranges_[i - 1].name + " and " + ranges_[i].name);
    }
  }

  /// Lines of `<hex start> <hex end> <name>`; blank lines and '#' comments skipped.
  static SymbolMap parse(std::istream& in) {
    std::vector<SymbolRange> ranges;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto text = detail::trim(line);
      if (text.empty() || text.front() == '#') continue;
      std::istringstream fields{std::string(text)};
      std::string start, end;
      fields >> start >> end;
      std::string name;
      std::getline(fields, name);
      name = std::string(detail::trim(name));
      if (name.empty())
        throw Error(ErrorKind::ParseError, "symbol map line " + std::to_string(line_no));
      ranges.push_back({detail::parse_hex_u64(start), detail::parse_hex_u64(end), name});
    }
    return SymbolMap(std::move(ranges));
  }

  static SymbolMap load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ParseError, "cannot read symbol map " + path);
    return parse(in);
  }

  const std::vector<SymbolRange>& ranges() const { return ranges_; }

 private:
  std::vector<SymbolRange> ranges_;
};

inline std::string unknown_symbol(std::uint64_t addr) { return "[unknown:" + detail::hex(addr) + "]"; }

inline std::string symbolize(std::uint64_t addr, const SymbolMap& map) {
  const auto& r = map.ranges();
  auto it = std::upper_bound(r.begin(), r.end(), addr,
                             [](std::uint64_t a, const SymbolRange& s) { return a < s.start; });
  if (it != r.begin()) {
    --it;
    if (addr < it->end) return it->name;
  }
  return unknown_symbol(addr);
}

/// Per-record exact symbols take precedence over the range map.
inline std::string frame_name(std::uint64_t addr, const SampleRecord& record, const SymbolMap& map) {
  if (const auto it = record.symbols.find(addr); it != record.symbols.end()) return it->second;
  return symbolize(addr, map);
}

// ---------------------------------------------------------------------------
// Folding
// ---------------------------------------------------------------------------

struct FoldedStack {
  std::vector<std::string> frames;  // root first
  std::uint64_t weight = 0;

  std::string joined() const {
    std::string out;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      if (i) out.push_back(';');
      out += frames[i];
    }
    return out;
  }

  friend bool operator==(const FoldedStack&, const FoldedStack&) = default;
};

/// Weight of each stack is the sum of the metric's counter deltas over the
/// samples that hit it; zero-weight stacks are dropped. Output is sorted by
/// the joined frame string.
inline std::vector<FoldedStack> fold_stacks(const std::vector<SampleRecord>& samples,
                                            const std::string& metric, const SymbolMap& symbols) {
  for (const auto& s : samples)
    if (!s.counter_values.count(metric))
      throw Error(ErrorKind::MetricMissing, "sample without '" + metric + "' counter");

  const auto deltas = stream_deltas(samples);
  std::map<std::string, FoldedStack> merged;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    FoldedStack stack;
    stack.frames.reserve(s.callchain.size());
    for (auto it = s.callchain.rbegin(); it != s.callchain.rend(); ++it)
      stack.frames.push_back(frame_name(*it, s, symbols));
    const std::uint64_t w = deltas[i].values.at(metric);
    auto [slot, fresh] = merged.try_emplace(stack.joined(), std::move(stack));
    slot->second.weight += w;
  }
  std::vector<FoldedStack> out;
  for (auto& [key, stack] : merged)
    if (stack.weight > 0) out.push_back(std::move(stack));
  return out;
}

/// Collapsed format: `frame;frame;frame <weight>` per line.
inline std::string to_collapsed(const std::vector<FoldedStack>& folded) {
  std::string out;
  for (const auto& f : folded) out += f.joined() + " " + std::to_string(f.weight) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Flame graph
// ---------------------------------------------------------------------------

struct FlameGraphOptions {
  double width = 1200.0;
  double row_height = 16.0;
  double font_size = 12.0;
  std::string title = "Flame Graph";
};

namespace detail {

struct FlameNode {
  std::string name;
  std::uint64_t weight = 0;
  std::map<std::string, FlameNode> children;  // alphabetical
};

inline std::uint32_t fnv1a(std::string_view text) {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : text) {
    h ^= c;
    h *= 16777619u;
  }
  return h;
}

inline std::string warm_color(std::string_view name) {
  const std::uint32_t h = fnv1a(name);
  const int r = 205 + static_cast<int>(h % 51);
  const int g = static_cast<int>((h >> 8) % 231);
  const int b = static_cast<int>((h >> 16) % 56);
  return "rgb(" + std::to_string(r) + "," + std::to_string(g) + "," + std::to_string(b) + ")";
}

inline std::size_t max_depth(const std::map<std::string, FlameNode>& nodes) {
  std::size_t depth = 0;
  for (const auto& [name, node] : nodes) depth = std::max(depth, 1 + max_depth(node.children));
  return depth;
}

}  // namespace detail

/// Self-contained SVG 1.1. Frame width over canvas width equals subtree
/// weight over total weight; depth grows upward; siblings are alphabetical.
/// Each frame is `<g><title>name (weight, pct%)</title><rect/><text/></g>`.
inline std::string render_flamegraph(const std::vector<FoldedStack>& folded,
                                     const std::string& metric_label,
                                     const FlameGraphOptions& opt = {}) {
  using detail::fixed;
  std::uint64_t total = 0;
  std::map<std::string, detail::FlameNode> roots;
  for (const auto& f : folded) {
    if (f.frames.empty() || f.weight == 0) continue;
    total += f.weight;
    auto* level = &roots;
    for (const auto& frame : f.frames) {
      auto& node = (*level)[frame];
      node.name = frame;
      node.weight += f.weight;
      level = &node.children;
    }
  }
  if (total == 0) throw Error(ErrorKind::EmptyInput, "flame graph needs a positive total weight");

  const double top_pad = 3 * opt.row_height;
  const double bottom_pad = opt.row_height;
  const std::size_t depth = detail::max_depth(roots);
  const double height = top_pad + static_cast<double>(depth) * opt.row_height + bottom_pad;
  const double char_width = opt.font_size * 0.59;

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" standalone=\"no\"?>\n"
      << "<!DOCTYPE svg PUBLIC \"-//W3C//DTD SVG 1.1//EN\" "
         "\"http://www.w3.org/Graphics/SVG/1.1/DTD/svg11.dtd\">\n"
      << "<svg version=\"1.1\" width=\"" << fixed(opt.width, 0) << "\" height=\""
      << fixed(height, 0) << "\" viewBox=\"0 0 " << fixed(opt.width, 0) << " " << fixed(height, 0)
      << "\" xmlns=\"http://www.w3.org/2000/svg\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"rgb(250,250,238)\"/>\n"
      << "<text x=\"" << fixed(opt.width / 2, 2) << "\" y=\"" << fixed(opt.row_height * 1.5, 2)
      << "\" text-anchor=\"middle\" font-family=\"Verdana\" font-size=\"17\">"
      << detail::xml_escape(opt.title + " (" + metric_label + ")") << "</text>\n"
      << "<text x=\"" << fixed(opt.width / 2, 2) << "\" y=\"" << fixed(height - 4, 2)
      << "\" text-anchor=\"middle\" font-family=\"Verdana\" font-size=\"10\">total "
      << detail::xml_escape(metric_label) << ": " << total << "</text>\n";

  auto emit = [&](auto&& self, const std::map<std::string, detail::FlameNode>& level,
                  std::size_t d, double x0) -> void {
    double offset = 0;
    for (const auto& [name, node] : level) {
      const double x = x0 + offset;
      const double w = static_cast<double>(node.weight) / static_cast<double>(total) * opt.width;
      const double y = height - bottom_pad - static_cast<double>(d + 1) * opt.row_height;
      const double pct = 100.0 * static_cast<double>(node.weight) / static_cast<double>(total);
      svg << "<g class=\"frame\"><title>" << detail::xml_escape(name) << " (" << node.weight << ", "
          << fixed(pct, 2) << "%)</title><rect x=\"" << fixed(x, 2) << "\" y=\"" << fixed(y, 2)
          << "\" width=\"" << fixed(w, 2) << "\" height=\"" << fixed(opt.row_height - 1, 2)
          << "\" fill=\"" << detail::warm_color(name) << "\" rx=\"2\" ry=\"2\"/>";
      const auto fit = static_cast<std::size_t>(std::max(0.0, (w - 6) / char_width));
      if (fit >= 3) {
        std::string label = name;
        if (label.size() > fit) label = label.substr(0, fit - 2) + "..";
        svg << "<text x=\"" << fixed(x + 3, 2) << "\" y=\"" << fixed(y + opt.row_height - 4.5, 2)
            << "\" font-family=\"Verdana\" font-size=\"" << fixed(opt.font_size, 0) << "\">"
            << detail::xml_escape(label) << "</text>";
      }
      svg << "</g>\n";
      self(self, node.children, d + 1, x);
      offset += w;
    }
  };
  emit(emit, roots, 0, 0.0);
  svg << "</svg>\n";
  return svg.str();
}

// ---------------------------------------------------------------------------
// Hotspot table
// ---------------------------------------------------------------------------

inline double ipc(std::uint64_t instructions, std::uint64_t cycles) {
  return cycles == 0 ? 0.0 : static_cast<double>(instructions) / static_cast<double>(cycles);
}

struct HotspotEntry {
  std::string function;
  double total_share = 0;  // self cycles / all cycles
  std::uint64_t instructions = 0;
  std::uint64_t cycles = 0;
  double ipc = 0;
};

/// Self-time attribution: each sample's cycle and instruction deltas go to
/// its leaf frame. Sorted by share descending, then name.
inline std::vector<HotspotEntry> hotspot_table(const std::vector<SampleRecord>& samples,
                                               const SymbolMap& symbols, std::size_t top_n) {
  for (const auto& s : samples)
    for (const char* metric : {"cycles", "instructions"})
      if (!s.counter_values.count(metric))
        throw Error(ErrorKind::MetricMissing, std::string("sample without '") + metric + "' counter");

  const auto deltas = stream_deltas(samples);
  std::map<std::string, HotspotEntry> per_function;
  std::uint64_t total_cycles = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    auto& e = per_function[frame_name(s.callchain.front(), s, symbols)];
    const auto c = deltas[i].values.at("cycles");
    e.cycles += c;
    e.instructions += deltas[i].values.at("instructions");
    total_cycles += c;
  }
  std::vector<HotspotEntry> out;
  out.reserve(per_function.size());
  for (auto& [name, e] : per_function) {
    e.function = name;
    e.total_share = total_cycles == 0 ? 0.0
                                      : static_cast<double>(e.cycles) / static_cast<double>(total_cycles);
    e.ipc = ipc(e.instructions, e.cycles);
    out.push_back(std::move(e));
  }
  std::stable_sort(out.begin(), out.end(), [](const HotspotEntry& a, const HotspotEntry& b) {
    if (a.cycles != b.cycles) return a.cycles > b.cycles;
    return a.function < b.function;
  });
  if (out.size() > top_n) out.resize(top_n);
  return out;
}

/// Columns: Function | Total, % | Instructions | Cycles | IPC.
inline std::string format_hotspot_table(const std::vector<HotspotEntry>& entries) {
  std::size_t name_w = std::string_view("Function").size();
  for (const auto& e : entries) name_w = std::max(name_w, e.function.size());
  std::string out = detail::pad_right("Function", name_w) + "  " + detail::pad_left("Total, %", 9) +
                    "  " + detail::pad_left("Instructions", 15) + "  " +
                    detail::pad_left("Cycles", 15) + "  " + detail::pad_left("IPC", 6) + "\n";
  for (const auto& e : entries) {
    out += detail::pad_right(e.function, name_w) + "  " +
           detail::pad_left(detail::fixed(100.0 * e.total_share, 2) + "%", 9) + "  " +
           detail::pad_left(detail::thousands(e.instructions), 15) + "  " +
           detail::pad_left(detail::thousands(e.cycles), 15) + "  " +
           detail::pad_left(detail::fixed(e.ipc, 2), 6) + "\n";
  }
  return out;
}

}  // namespace mperf
