"""Physical constants and the sign conventions shared by all modules.

Time dependence is exp(+j omega t); the Green's function is
exp(-j k R) / (4 pi R).  Every place where a testing sign or the
identity-term factor enters reads it from here, so the operator assembly,
the right-hand sides and the formulations cannot drift apart.
"""

import math

C0 = 299792458.0                  # m/s
MU0 = 1.25663706212e-6            # H/m
EPS0 = 1.0 / (MU0 * C0 * C0)      # F/m
Z0 = 376.730313668                # ohm

# e_m = +<beta_m, E_inc>: the electric equation is tested with RWG
EFIE_RHS_SIGN = 1.0
# h_m = +<beta_m, n x H_inc>
MFIE_RHS_SIGN = 1.0
# identity term of the tested electric equation for magnetic currents
# (-1/2 A) and of the tested magnetic equation for electric currents (+1/2 A')
CSIE_IDENTITY = -0.5
MFIE_IDENTITY = 0.5


def wavenumber(frequency):
    return 2.0 * math.pi * frequency / C0


def frequency_from_k(k0):
    return k0 * C0 / (2.0 * math.pi)
