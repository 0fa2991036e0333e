"""Tour of the catalog: which bounds each estimator attains.

For every worked family we compute the escort (Naudts) bound and compare it
with the exact variance of the estimator.  Where the family is regular we
also show the classical Cramér-Rao and Bhattacharyya bounds built from f
alone, which fall short for some of these estimators.

Run:  python3 demos/attainment_tour.py
"""

from escortbounds import catalog
from escortbounds.bounds import bhattacharyya_regular, classical_cr, naudts_bound
from escortbounds.errors import RegularityError
from escortbounds.model import EscortPair

THETA = 1.0

print(f"{'entry':<20} {'variance':>14} {'escort bound':>14} {'attained':>9}   classical (g = f)")
for name in catalog.catalog_names():
    e = catalog.catalog_lookup(name)
    kw = {"truncation": 60} if e.f.is_discrete else {}
    rep = naudts_bound(e.escort, e.statistic, THETA, **kw)
    try:
        cr = classical_cr(e.f, e.statistic, THETA, **kw).bound
        b2 = bhattacharyya_regular(EscortPair.self_pair(e.f), e.statistic, THETA, 2, **kw).bound
        classical = f"CR {cr:.6g}, order 2 {b2:.6g}"
    except RegularityError:
        # the support moves with theta, so f-derivative scores are not zero-mean
        classical = "not defined (support depends on theta)"
    print(f"{name:<20} {rep.variance:>14.10g} {rep.bound:>14.10g} {str(rep.attained):>9}   {classical}")

print()
print("normal-x4: the first-order escort bound already equals the order-2 classical bound,")
print("while the classical first-order (Cramér-Rao) bound misses the variance by 25%.")
