"""Export the German credit dataset (OpenML id 31) to data/openml31.csv.

Run this on a machine with network access, then copy the CSV into the
repository's data/ directory so the credit benchmark test can run.
"""
import argparse
import csv
import io
import os
import urllib.request

ARFF_URL = "https://www.openml.org/data/download/31/dataset_31_credit-g.arff"


def via_sklearn():
    from sklearn.datasets import fetch_openml
    frame = fetch_openml(data_id=31, as_frame=True).frame
    names = [str(c) for c in frame.columns]
    return names, frame.astype(str).values.tolist()


def via_arff(url):
    """Minimal ARFF reader: @attribute names, then @data rows as CSV."""
    raw = urllib.request.urlopen(url, timeout=60).read().decode("utf-8")
    names, rows, in_data = [], [], False
    for line in raw.splitlines():
        line = line.strip()
        if not line or line.startswith("%"):
            continue
        low = line.lower()
        if low.startswith("@attribute"):
            names.append(line.split()[1].strip("'\""))
        elif low.startswith("@data"):
            in_data = True
        elif in_data:
            rows.append(next(csv.reader(io.StringIO(line), quotechar="'")))
    return names, rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data/openml31.csv")
    ap.add_argument("--url", default=ARFF_URL,
                    help="ARFF fallback source when scikit-learn is absent")
    args = ap.parse_args(argv)
    try:
        names, rows = via_sklearn()
    except Exception as exc:
        print(f"scikit-learn path unavailable ({exc}); fetching ARFF")
        names, rows = via_arff(args.url)
    if names[-1] != "class":
        raise SystemExit(f"expected last column 'class', got {names[-1]!r}")
    if len(rows) != 1000:
        raise SystemExit(f"expected 1000 rows, got {len(rows)}")
    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        w.writerows(rows)
    labels = sorted({r[-1] for r in rows})
    print(f"wrote {len(rows)} rows x {len(names)} columns to {args.out}; "
          f"target levels: {labels}")


if __name__ == "__main__":
    main()
