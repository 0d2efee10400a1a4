"""Full duplex against the three comparison schemes on the paper scene.

Pass a downlink threshold in dB as the first argument (default 12).
"""
import math
import sys

from nfisac.baselines import Scheme
from nfisac.config import apply_sweep_value, from_dict, load_bundled
from nfisac.experiments import FAILURES, run_scheme
from nfisac.scenario import watt2dbm

tau_db = float(sys.argv[1]) if len(sys.argv) > 1 else 12.0
cfg = from_dict(apply_sweep_value(load_bundled("paper_fig5").raw, "tau_dl_db", tau_db))

fd = None
for scheme in Scheme:
    try:
        res = run_scheme(cfg, scheme)
    except FAILURES as exc:
        print(f"{scheme.value:9s} failed: {exc}")
        continue
    p = float(watt2dbm(res.objective_watts))
    fd = p if scheme is Scheme.FD else fd
    extra = ""
    if res.per_slot:
        extra = " (slots " + ", ".join(f"{float(watt2dbm(x)):.2f}" if x > 0 else "-inf" for x in res.per_slot) + " dBm)"
    if res.scale not in (None, 1.0):
        extra = f" (mismatch scale {10 * math.log10(res.scale):.2f} dB)"
    print(f"{scheme.value:9s} {p:8.3f} dBm  {p - fd:+6.2f} dB vs FD{extra}")
