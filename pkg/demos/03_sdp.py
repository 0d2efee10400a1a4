"""The dense SDP solver on problems with known answers."""
import numpy as np

from nfisac.sdp import SdpConstraint, SdpProblem, solve

rng = np.random.default_rng(0)

# single-user downlink: min Tr F  s.t.  h^H F h >= tau * sigma^2
n, tau, sigma2 = 8, 10.0, 0.1
h = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
prob = SdpProblem([n], [np.eye(n, dtype=complex)], [SdpConstraint([-np.outer(h, h.conj()) / tau], sigma2, "user")])
sol = solve(prob)
print(sol.status.value, sol.message)
print(f"objective {sol.objective_value:.10f}, closed form {tau * sigma2 / np.vdot(h, h).real:.10f}")
print("eigenvalues of F:", np.round(np.linalg.eigvalsh(sol.blocks[0])[::-1][:3], 8))

# add a power budget below the minimum: infeasible, with a Farkas certificate
budget = 0.5 * tau * sigma2 / np.vdot(h, h).real
prob.constraints.append(SdpConstraint([np.eye(n, dtype=complex)], -budget, "budget"))
bad = solve(prob)
print(bad.status.value, "- certificate:", np.round(bad.certificate, 4))
