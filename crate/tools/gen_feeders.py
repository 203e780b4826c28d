#!/usr/bin/env python3
"""Regenerate the feeder documents under data/feeders/.

Impedances are written in ohms for the whole segment (per-mile data times
length). Loads are wye-equivalent constant-power kW/kvar per phase.
"""
import json
import os

OUT = os.path.join(os.path.dirname(__file__), "..", "data", "feeders")
FT_PER_MILE = 5280.0
PH = "ABC"


def full(entries):
    """entries: dict {(i,j): complex} in ohm/mile, symmetric fill."""
    z = [[0j] * 3 for _ in range(3)]
    for (i, j), v in entries.items():
        z[i][j] = v
        z[j][i] = v
    return z


def seg(zpm, length_ft):
    k = length_ft / FT_PER_MILE
    r = [[round(zpm[i][j].real * k, 10) for j in range(3)] for i in range(3)]
    x = [[round(zpm[i][j].imag * k, 10) for j in range(3)] for i in range(3)]
    return r, x


def diag(phases, r, x):
    rr = [[0.0] * 3 for _ in range(3)]
    xx = [[0.0] * 3 for _ in range(3)]
    for p in phases:
        i = PH.index(p)
        rr[i][i] = r
        xx[i][i] = x
    return rr, xx


def branch(frm, to, phases, rx):
    r, x = rx
    return {"id": f"{frm}-{to}", "from": frm, "to": to, "phases": phases,
            "units": "ohm", "r": r, "x": x}


def write(name, doc):
    with open(os.path.join(OUT, name), "w") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


def bus_phases(branches, slack, slack_phases="ABC"):
    ph = {slack: set(slack_phases)}
    for b in branches:
        for end in (b["from"], b["to"]):
            ph.setdefault(end, set()).update(b["phases"])
    return {k: "".join(p for p in PH if p in v) for k, v in ph.items()}


# ---------------------------------------------------------------- 13 bus
def ieee13():
    c601 = full({(0, 0): 0.3465 + 1.0179j, (0, 1): 0.1560 + 0.5017j, (0, 2): 0.1580 + 0.4236j,
                 (1, 1): 0.3375 + 1.0478j, (1, 2): 0.1535 + 0.3849j, (2, 2): 0.3414 + 1.0348j})
    c602 = full({(0, 0): 0.7526 + 1.1814j, (0, 1): 0.1580 + 0.4236j, (0, 2): 0.1560 + 0.5017j,
                 (1, 1): 0.7475 + 1.1983j, (1, 2): 0.1535 + 0.3849j, (2, 2): 0.7436 + 1.2112j})
    c603 = full({(1, 1): 1.3294 + 1.3471j, (1, 2): 0.2066 + 0.4591j, (2, 2): 1.3238 + 1.3569j})
    c604 = full({(0, 0): 1.3238 + 1.3569j, (0, 2): 0.2066 + 0.4591j, (2, 2): 1.3294 + 1.3471j})
    c605 = full({(2, 2): 1.3292 + 1.3475j})
    c606 = full({(0, 0): 0.7982 + 0.4463j, (0, 1): 0.3192 + 0.0328j, (0, 2): 0.2849 - 0.0143j,
                 (1, 1): 0.7891 + 0.4041j, (1, 2): 0.3192 + 0.0328j, (2, 2): 0.7982 + 0.4463j})
    c607 = full({(0, 0): 1.3425 + 0.5124j})
    # 500 kVA 4.16/0.48 kV, 1.1% + j2% on its own base, referred to 4.16 kV
    zb_xfm = 4.16 ** 2 / 0.5
    branches = [
        branch("650", "632", "ABC", seg(c601, 2000)),
        branch("632", "633", "ABC", seg(c602, 500)),
        branch("633", "634", "ABC", diag("ABC", 0.011 * zb_xfm, 0.02 * zb_xfm)),
        branch("632", "645", "BC", seg(c603, 500)),
        branch("645", "646", "BC", seg(c603, 300)),
        branch("632", "671", "ABC", seg(c601, 2000)),
        branch("671", "684", "AC", seg(c604, 300)),
        branch("684", "611", "C", seg(c605, 300)),
        branch("684", "652", "A", seg(c607, 800)),
        branch("671", "680", "ABC", seg(c601, 1000)),
        branch("671", "692", "ABC", diag("ABC", 1e-4, 0.0)),
        branch("692", "675", "ABC", seg(c606, 500)),
    ]
    loads = {
        "634": {"A": [160, 110], "B": [120, 90], "C": [120, 90]},
        "645": {"B": [170, 125]},
        "646": {"B": [230, 132]},
        "652": {"A": [128, 86]},
        # spot load plus the 632-671 distributed load lumped at the far end
        "671": {"A": [385 + 17, 220 + 10], "B": [385 + 66, 220 + 38], "C": [385 + 117, 220 + 68]},
        # 200 kvar per phase shunt capacitor netted into the load
        "675": {"A": [485, 190 - 200], "B": [68, 60 - 200], "C": [290, 212 - 200]},
        "692": {"C": [170, 151]},
        # 100 kvar capacitor on phase C netted into the load
        "611": {"C": [170, 80 - 100]},
    }
    order = ["650", "632", "633", "634", "645", "646", "671", "680", "684", "611", "652", "692", "675"]
    ph = bus_phases(branches, "650")
    buses = [{"id": b, "phases": ph[b], **({"load": loads[b]} if b in loads else {})} for b in order]
    doc = {
        "name": "ieee13",
        "base_kV": 4.16,
        "base_MVA": 5.0,
        "slack": "650",
        "notes": [
            "Substation regulator 650-632 removed; its boost is represented by the case slack voltage.",
            "Transformer XFM-1 (633-634) reduced to its series impedance referred to 4.16 kV; 634 loads kept at their kW/kvar values.",
            "Switch 671-692 modelled as a 1e-4 ohm series resistance.",
            "All loads converted to wye constant-power; delta loads assigned to the first phase of their phase pair (646 -> B, 692 -> C).",
            "Distributed load on 632-671 lumped at bus 671; shunt capacitors at 675 and 611 netted into reactive load.",
            "Shunt line charging ignored.",
        ],
        "buses": buses,
        "branches": branches,
        "dg": [
            {"id": "PV675", "bus": "675", "phases": "A", "kind": "PV", "P": [106.72, 149.53],
             "pf": 0.95, "lagging": True, "metered": False},
            {"id": "PV684", "bus": "684", "phases": "C", "kind": "PV", "P": [106.72, 149.53],
             "pf": 0.95, "lagging": True, "metered": True},
            {"id": "WTG680", "bus": "680", "phases": "ABC", "kind": "WTG", "P": [84.52, 103.31],
             "pf": 0.85, "lagging": True, "metered": False},
        ],
    }
    write("ieee13.json", doc)


# ---------------------------------------------------------------- 123 bus
def ieee123():
    a, b, c = 0.4576 + 1.0780j, 0.4666 + 1.0482j, 0.4615 + 1.0651j
    m1, m2, m3 = 0.1560 + 0.5017j, 0.1580 + 0.4236j, 0.1535 + 0.3849j
    cfg = {
        1: full({(0, 0): a, (0, 1): m1, (0, 2): m3, (1, 1): b, (1, 2): m2, (2, 2): c}),
        2: full({(0, 0): b, (0, 1): m2, (0, 2): m1, (1, 1): c, (1, 2): m3, (2, 2): a}),
        3: full({(0, 0): c, (0, 1): m3, (0, 2): m2, (1, 1): a, (1, 2): m1, (2, 2): b}),
        4: full({(0, 0): c, (0, 1): m2, (0, 2): m3, (1, 1): b, (1, 2): m1, (2, 2): a}),
        5: full({(0, 0): b, (0, 1): m1, (0, 2): m2, (1, 1): a, (1, 2): m3, (2, 2): c}),
        6: full({(0, 0): a, (0, 1): m3, (0, 2): m1, (1, 1): c, (1, 2): m2, (2, 2): b}),
        7: full({(0, 0): a, (0, 2): m3, (2, 2): c}),
        8: full({(0, 0): a, (0, 1): m3, (1, 1): c}),
        9: full({(0, 0): 1.3292 + 1.3475j}),
        10: full({(1, 1): 1.3292 + 1.3475j}),
        11: full({(2, 2): 1.3292 + 1.3475j}),
        12: full({(0, 0): 1.5209 + 0.7521j, (0, 1): 0.5198 + 0.2775j, (0, 2): 0.4924 + 0.2157j,
                  (1, 1): 1.5329 + 0.7162j, (1, 2): 0.5198 + 0.2775j, (2, 2): 1.5209 + 0.7521j}),
    }
    cfg_phases = {1: "ABC", 2: "ABC", 3: "ABC", 4: "ABC", 5: "ABC", 6: "ABC", 7: "AC", 8: "AB",
                  9: "A", 10: "B", 11: "C", 12: "ABC"}
    lines = """
    149 1 400 1
    1 2 175 10
    1 3 250 11
    1 7 300 1
    3 4 200 11
    3 5 325 11
    5 6 250 11
    7 8 200 1
    8 12 225 10
    8 9 225 9
    8 13 300 1
    9 14 425 9
    13 34 150 11
    13 18 825 2
    14 11 250 9
    14 10 250 9
    15 16 375 11
    15 17 350 11
    18 19 250 9
    18 21 300 2
    19 20 325 9
    21 22 525 10
    21 23 250 2
    23 24 550 11
    23 25 275 2
    25 26 350 7
    25 28 200 2
    26 27 275 7
    26 31 225 11
    27 33 500 9
    28 29 300 2
    29 30 350 2
    30 250 200 2
    31 32 300 11
    34 15 100 11
    35 36 650 8
    35 40 250 1
    36 37 300 9
    36 38 250 10
    38 39 325 10
    40 41 325 11
    40 42 250 1
    42 43 500 10
    42 44 200 1
    44 45 200 9
    44 47 250 1
    45 46 300 9
    47 48 150 4
    47 49 250 4
    49 50 250 4
    50 51 250 4
    51 151 500 4
    52 53 200 1
    53 54 125 1
    54 55 275 1
    54 57 350 3
    55 56 275 1
    57 58 250 10
    57 60 750 3
    58 59 250 10
    60 61 550 5
    60 62 250 12
    62 63 175 12
    63 64 350 12
    64 65 425 12
    65 66 325 12
    67 68 200 9
    67 72 275 3
    67 97 250 3
    68 69 275 9
    69 70 325 9
    70 71 275 9
    72 73 275 11
    72 76 200 3
    73 74 350 11
    74 75 400 11
    76 77 400 6
    76 86 700 3
    77 78 100 6
    78 79 225 6
    78 80 475 6
    80 81 475 6
    81 82 250 6
    81 84 675 11
    82 83 250 6
    84 85 475 11
    86 87 450 6
    87 88 175 9
    87 89 275 6
    89 90 225 10
    89 91 225 6
    91 92 300 11
    91 93 225 6
    93 94 275 9
    93 95 300 6
    95 96 200 10
    97 98 275 3
    98 99 550 3
    99 100 300 3
    100 450 800 3
    101 102 225 11
    101 105 275 3
    102 103 325 11
    103 104 700 11
    105 106 225 10
    105 108 325 3
    106 107 575 10
    108 109 450 9
    108 300 1000 3
    109 110 300 9
    110 111 575 9
    110 112 125 9
    112 113 525 9
    113 114 325 9
    135 35 375 4
    152 52 400 1
    160 67 350 6
    197 101 250 3
    """
    branches = []
    for ln in lines.strip().splitlines():
        f, t, length, k = ln.split()
        branches.append(branch(f, t, cfg_phases[int(k)], seg(cfg[int(k)], float(length))))
    for f, t in [("13", "152"), ("18", "135"), ("60", "160"), ("97", "197")]:
        branches.append(branch(f, t, "ABC", diag("ABC", 1e-4, 0.0)))

    spot = """
    1 A 40 20
    2 B 20 10
    4 C 40 20
    5 C 20 10
    6 C 40 20
    7 A 20 10
    9 A 40 20
    10 A 20 10
    11 A 40 20
    12 B 20 10
    16 C 40 20
    17 C 20 10
    19 A 40 20
    20 A 40 20
    22 B 40 20
    24 C 40 20
    28 A 40 20
    29 A 40 20
    30 C 40 20
    31 C 20 10
    32 C 20 10
    33 A 40 20
    34 C 40 20
    35 A 40 20
    37 A 40 20
    38 B 20 10
    39 B 20 10
    41 C 20 10
    42 A 20 10
    43 B 40 20
    45 A 20 10
    46 A 20 10
    47 A 35 25
    47 B 35 25
    47 C 35 25
    48 A 70 50
    48 B 70 50
    48 C 70 50
    49 A 35 25
    49 B 70 50
    49 C 35 20
    50 C 40 20
    51 A 20 10
    52 A 40 20
    53 A 40 20
    55 A 20 10
    56 B 20 10
    58 B 20 10
    59 B 20 10
    60 A 20 10
    62 C 40 20
    63 A 40 20
    64 B 75 35
    65 A 35 25
    65 B 35 25
    65 C 70 50
    66 C 75 35
    68 A 20 10
    69 A 40 20
    70 A 20 10
    71 A 40 20
    73 C 40 20
    74 C 40 20
    75 C 40 20
    76 A 105 80
    76 B 70 50
    76 C 70 50
    77 B 40 20
    79 A 40 20
    80 B 40 20
    82 A 40 20
    83 C 20 10
    84 C 20 10
    85 C 40 20
    86 B 20 10
    87 B 40 20
    88 A 40 20
    90 B 40 20
    92 C 40 20
    94 A 40 20
    95 B 20 10
    96 B 20 10
    98 A 40 20
    99 B 40 20
    100 C 40 20
    102 C 20 10
    103 C 40 20
    104 C 40 20
    106 B 40 20
    107 B 40 20
    109 A 40 20
    111 A 20 10
    112 A 20 10
    113 A 40 20
    114 A 20 10
    """
    loads = {}
    for ln in spot.strip().splitlines():
        bus, p, kw, kvar = ln.split()
        loads.setdefault(bus, {})[p] = [float(kw), float(kvar)]

    ph = bus_phases(branches, "149")
    order = ["149"]
    seen = {"149"}
    # breadth-first order from the slack keeps the document readable
    frontier = ["149"]
    while frontier:
        nxt = []
        for u in frontier:
            for br in branches:
                if br["from"] == u and br["to"] not in seen:
                    seen.add(br["to"])
                    order.append(br["to"])
                    nxt.append(br["to"])
        frontier = nxt
    buses = [{"id": b, "phases": ph[b], **({"load": loads[b]} if b in loads else {})} for b in order]
    doc = {
        "name": "ieee123",
        "base_kV": 4.16,
        "base_MVA": 5.0,
        "slack": "149",
        "notes": [
            "Slack placed at bus 149; the substation regulator 150-149 is represented by the case slack voltage.",
            "Regulators 9-14, 25-26 and 160-67 reduced to their line segments (no tap action).",
            "Closed switches 13-152, 18-135, 60-160 and 97-197 modelled as 1e-4 ohm series resistances; open switches and tie paths (250-251, 450-451, 54-94, 151-300, 300-350) omitted.",
            "Transformer 61-610 and bus 610 omitted (no load).",
            "All spot loads converted to wye constant-power kW/kvar; delta loads assigned to the first phase of their pair; capacitors omitted.",
            "DG at bus 14 placed on phase A, the only phase present on that lateral in this conversion.",
            "Shunt line charging ignored.",
        ],
        "buses": buses,
        "branches": branches,
        "dg": [
            {"id": "PV14", "bus": "14", "phases": "A", "kind": "PV", "P": [106.72, 149.53],
             "pf": 0.95, "lagging": True, "metered": False},
            {"id": "WTG61", "bus": "61", "phases": "ABC", "kind": "WTG", "P": [84.52, 103.31],
             "pf": 0.85, "lagging": True, "metered": False},
            {"id": "WTG151", "bus": "151", "phases": "ABC", "kind": "WTG", "P": [84.52, 103.31],
             "pf": 0.85, "lagging": True, "metered": False},
            {"id": "WTG250", "bus": "250", "phases": "ABC", "kind": "WTG", "P": [84.52, 103.31],
             "pf": 0.85, "lagging": True, "metered": False},
            {"id": "PV300", "bus": "300", "phases": "A", "kind": "PV", "P": [106.72, 149.53],
             "pf": 0.95, "lagging": True, "metered": False},
            {"id": "PV450", "bus": "450", "phases": "A", "kind": "PV", "P": [106.72, 149.53],
             "pf": 0.95, "lagging": True, "metered": False},
        ],
    }
    write("ieee123.json", doc)


# ---------------------------------------------------------------- toys
def toys():
    write("toy2.json", {
        "name": "toy2", "base_kV": 4.16, "base_MVA": 5.0, "slack": "1",
        "buses": [{"id": "1", "phases": "A"}, {"id": "2", "phases": "A", "load": {"A": [300.0, 150.0]}}],
        "branches": [{"id": "1-2", "from": "1", "to": "2", "phases": "A", "units": "pu",
                      "r": [[0.01, 0, 0], [0, 0, 0], [0, 0, 0]], "x": [[0.02, 0, 0], [0, 0, 0], [0, 0, 0]]}],
        "dg": [],
    })
    zpm = full({(0, 0): 0.3465 + 1.0179j, (0, 1): 0.1560 + 0.5017j, (0, 2): 0.1580 + 0.4236j,
                (1, 1): 0.3375 + 1.0478j, (1, 2): 0.1535 + 0.3849j, (2, 2): 0.3414 + 1.0348j})
    write("toy3.json", {
        "name": "toy3", "base_kV": 4.16, "base_MVA": 5.0, "slack": "1",
        "buses": [{"id": "1", "phases": "ABC"},
                  {"id": "2", "phases": "ABC", "load": {"A": [200, 100], "B": [150, 80], "C": [180, 90]}},
                  {"id": "3", "phases": "ABC", "load": {"A": [100, 40], "B": [120, 60], "C": [90, 30]}}],
        "branches": [branch("1", "2", "ABC", seg(zpm, 1500)), branch("2", "3", "ABC", seg(zpm, 1000))],
        "dg": [{"id": "PV3", "bus": "3", "phases": "B", "kind": "PV", "P": [40.0, 60.0],
                "pf": 0.95, "lagging": True, "metered": False}],
    })
    write("toy4.json", {
        "name": "toy4", "base_kV": 4.16, "base_MVA": 5.0, "slack": "1",
        "buses": [{"id": "1", "phases": "ABC"},
                  {"id": "2", "phases": "ABC", "load": {"A": [150, 70], "B": [100, 50], "C": [120, 60]}},
                  {"id": "3", "phases": "AC", "load": {"A": [80, 40], "C": [60, 30]}},
                  {"id": "4", "phases": "B", "load": {"B": [90, 40]}}],
        "branches": [branch("1", "2", "ABC", seg(zpm, 2000)),
                     branch("2", "3", "AC", seg(full({(0, 0): 1.3238 + 1.3569j, (0, 2): 0.2066 + 0.4591j,
                                                      (2, 2): 1.3294 + 1.3471j}), 600)),
                     branch("2", "4", "B", seg(full({(1, 1): 1.3292 + 1.3475j}), 500))],
        "dg": [{"id": "WTG2", "bus": "2", "phases": "ABC", "kind": "WTG", "P": [84.52, 103.31],
                "pf": 0.85, "lagging": True, "metered": False}],
    })


if __name__ == "__main__":
    ieee13()
    ieee123()
    toys()
