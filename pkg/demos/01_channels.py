"""Near-field vs planar-wave array responses for the 65-element array at 28 GHz.

Run: python demos/01_channels.py
"""
import numpy as np

from nfisac.channel import ArrayGeometry, PolarPoint, far_field_response, near_field_response, path_gain

geom = ArrayGeometry.half_wavelength(65, 28e9)
print(f"wavelength {geom.wavelength * 1e3:.3f} mm, spacing {geom.spacing * 1e3:.3f} mm")
print(f"aperture {geom.aperture:.3f} m, Rayleigh distance {geom.rayleigh_distance:.2f} m")

# how well does a planar wave describe a point source at range r?
# |a_far^H a_near| / N is 1 when the models agree
for deg in (0, 30, 60):
    row = []
    for r in (1, 3, 6, 10, 20, 50, 200):
        p = PolarPoint.from_degrees(r, deg)
        c = abs(np.vdot(far_field_response(geom, p.angle), near_field_response(geom, p))) / geom.num_elements
        row.append(f"{10 * np.log10(c ** 2):6.2f}")
    print(f"theta={deg:2d} deg  loss dB at r=1,3,6,10,20,50,200 m:", " ".join(row))

# near-field focusing resolves range: a beam focused at 3 m seen along broadside
a3 = near_field_response(geom, PolarPoint.from_degrees(3.0, 0.0))
for r in (1.5, 2.0, 3.0, 4.0, 6.0, 10.0):
    g = abs(np.vdot(a3, near_field_response(geom, PolarPoint.from_degrees(r, 0.0)))) ** 2 / 65 ** 2
    print(f"  focused at 3 m, gain at {r:4.1f} m: {10 * np.log10(g):6.2f} dB")

# free-space path gain, no calibration offset
for r in (1, 10, 100):
    print(f"path gain at {r:3d} m: {10 * np.log10(path_gain(r, geom.wavelength)):.1f} dB")
