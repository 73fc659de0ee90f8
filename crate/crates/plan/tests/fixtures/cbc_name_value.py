#!/usr/bin/env python3
"""Runs CBC on a model file and rewrites its solution as `name value` lines.

usage: cbc_name_value.py CBC MODEL SOLUTION
"""
import re
import subprocess
import sys
import tempfile


def columns(model):
    names = []
    if model.endswith(".mps"):
        section = None
        for line in open(model):
            if not line.strip():
                continue
            if not line[0].isspace():
                section = line.split()[0]
                continue
            f = line.split()
            if section == "COLUMNS" and "'MARKER'" not in f and f[0] not in names:
                names.append(f[0])
        return names
    text = open(model).read()
    body = re.split(r"(?im)^\s*bounds\s*$", text)[-1]
    for n in body.split():
        if re.match(r"[A-Za-z_]", n) and n.lower() not in ("binaries", "binary", "end", "generals", "free", "inf", "infinity") and n not in names:
            names.append(n)
    return names


def main():
    cbc, model, out = sys.argv[1:4]
    with tempfile.NamedTemporaryFile(suffix=".sol") as sol:
        subprocess.run([cbc, model, "solve", "solu", sol.name], check=True, stdout=subprocess.DEVNULL)
        lines = open(sol.name).read().splitlines()
    head = lines[0].lower() if lines else ""
    with open(out, "w") as f:
        if "infeasible" in head:
            f.write("status infeasible\n")
            return
        if not head.startswith("optimal"):
            f.write("status timeout\n")
            return
        values = {}
        for line in lines[1:]:
            p = line.replace("**", " ").split()
            values[p[1]] = p[2]
        f.write("status optimal\n")
        for n in columns(model):
            f.write(f"{n} {values.get(n, '0')}\n")


if __name__ == "__main__":
    main()
