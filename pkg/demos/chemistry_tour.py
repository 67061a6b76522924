"""A walk through the molecule layer: parsing, scaffolds and fingerprints.

    python3 demos/chemistry_tour.py
"""

from divmol.chem import (
    ParseError,
    fingerprint,
    molecular_scaffold,
    parse,
    tanimoto_distance,
    topological_scaffold,
)


def show_parse(text):
    try:
        g = parse(text)
    except ParseError as exc:
        print(f"  {text:<22} rejected: {type(exc).__name__}")
        return None
    print(f"  {text:<22} {len(g)} atoms, {len(g.bonds)} bonds")
    return g


def main():
    print("Parsing. Ring digits must pair up, branches must balance, valences must fit:")
    for text in ("C1CCCCC1C", "C1CC", "C((C)C", "CF(C)C", "C1CC(=O)NC1"):
        show_parse(text)

    print("\nScaffolds. Side chains are pruned away; the topological form also forgets")
    print("atom types and bond orders:")
    for text in ("C1CCCCC1CCO", "C1CCNCC1CCO", "C1CC=CCC1", "CCCN"):
        g = parse(text)
        print(f"  {text:<14} molecular {molecular_scaffold(g).canonical:<12} "
              f"topological {topological_scaffold(g).canonical}")

    print("\nFingerprints. Radius-2 circular environments hashed into 2048 bits:")
    mols = ["C1CCC(CCO)CC1", "C1CCC(CCCO)CC1", "C1CCSC1N", "FC(F)F"]
    fps = {m: fingerprint(parse(m)) for m in mols}
    for m in mols:
        print(f"  {m:<16} {fps[m].popcount} bits set")
    print("\nTanimoto distances (0 = identical bit sets, 1 = disjoint):")
    print(" " * 18 + "".join(f"{m[:10]:>12}" for m in mols))
    for a in mols:
        print(f"  {a:<16}" + "".join(f"{tanimoto_distance(fps[a], fps[b]):12.3f}" for b in mols))
    print("\nThe two cyclohexane alcohols sit well inside the 0.7 diversity radius of each")
    print("other, so only one of them would count as a diverse active.")


if __name__ == "__main__":
    main()
