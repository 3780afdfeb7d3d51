#!/usr/bin/env python3
"""Regenerates the replay traces in this directory.

Instruction counts of the three hottest functions and their IPC follow the
sqlite3 hotspot measurements on the SpacemiT X60; cycles are derived as
instructions / IPC. The remaining cycles are spread across filler functions
so the three named functions keep their relative ranking.
"""
import json
import os

HERE = os.path.dirname(os.path.abspath(__file__))

# name -> (start, end) of a fake text segment layout
FUNCS = [
    ("main", 0x10000, 0x10400),
    ("sqlite3_step", 0x20000, 0x20800),
    ("sqlite3VdbeExec", 0x30000, 0x38000),
    ("patternCompare", 0x40000, 0x40600),
    ("sqlite3BtreeParseCellPtr", 0x41000, 0x41400),
    ("sqlite3VdbeRecordCompare", 0x42000, 0x42800),
    ("sqlite3BtreeMovetoUnpacked", 0x43000, 0x43a00),
    ("sqlite3GetVarint", 0x44000, 0x44200),
    ("memcpy", 0x50000, 0x50300),
    ("sqlite3BtreeNext", 0x45000, 0x45500),
    ("sqlite3VdbeMemRelease", 0x46000, 0x46400),
    ("sqlite3_value_text", 0x47000, 0x47200),
]
ADDR = {name: start for name, start, _ in FUNCS}


def split(total, parts):
    base, rem = divmod(total, parts)
    return [base + (1 if i < rem else 0) for i in range(parts)]


def write_trace(path, workload, with_proxy):
    """workload: list of (leaf, instructions, cycles, samples)."""
    per_func = []
    for leaf, instr, cycles, n in workload:
        per_func.append(list(zip([leaf] * n, split(instr, n), split(cycles, n))))
    # Round-robin interleave so every function appears throughout the run.
    order = []
    while any(per_func):
        for chunk in per_func:
            if chunk:
                order.append(chunk.pop(0))
    ts = 1_000_000_000
    acc_i = acc_c = 0
    with open(path, "w") as out:
        for k, (leaf, di, dc) in enumerate(order):
            acc_i += di
            acc_c += dc
            ts += 1_003_009
            leaf_pc = ADDR[leaf] + 0x40 + 4 * (k % 16)
            counters = {"cycles": acc_c, "instructions": acc_i}
            if with_proxy:
                counters["u_mode_cycle"] = acc_c - acc_c // 50
            rec = {
                "ts": ts,
                "pid": 4242,
                "tid": 4242,
                "pc": leaf_pc,
                "stack": [leaf_pc, ADDR["sqlite3_step"] + 0x120, ADDR["main"] + 0x88],
                "counters": dict(sorted(counters.items())),
            }
            out.write(json.dumps(rec, separators=(",", ":")) + "\n")


def cycles(instr, ipc):
    return round(instr / ipc)


vdbe_c = cycles(3_634_478_335, 0.86)
total_c = round(vdbe_c / 0.1844)
named = [
    ("sqlite3VdbeExec", 3_634_478_335, vdbe_c, 40),
    ("patternCompare", 2_298_438_217, cycles(2_298_438_217, 0.86), 30),
    ("sqlite3BtreeParseCellPtr", 1_905_893_304, cycles(1_905_893_304, 0.82), 25),
]
rest = total_c - sum(c for _, _, c, _ in named)
fillers = ["sqlite3VdbeRecordCompare", "sqlite3BtreeMovetoUnpacked", "sqlite3GetVarint", "memcpy",
           "sqlite3BtreeNext", "sqlite3VdbeMemRelease", "sqlite3_value_text"]
filler_ipc = [1.10, 0.95, 1.30, 1.45, 0.90, 1.05, 1.20]
filler_c = split(rest, len(fillers))
workload = named + [(f, round(c * ipc), c, 20) for f, c, ipc in zip(fillers, filler_c, filler_ipc)]

write_trace(os.path.join(HERE, "x60_sqlite.jsonl"), workload, with_proxy=True)
write_trace(os.path.join(HERE, "x60_vdbe_stat.jsonl"),
            [("sqlite3VdbeExec", 3_634_478_335, vdbe_c, 12)], with_proxy=True)

with open(os.path.join(HERE, "sqlite.syms"), "w") as out:
    out.write("# start end name\n")
    for name, start, end in FUNCS:
        out.write(f"{start:x} {end:x} {name}\n")

print("vdbe cycles", vdbe_c, "total cycles", total_c)
