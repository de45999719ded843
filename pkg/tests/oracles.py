"""Reference implementations that share no code with the package.

The four-bar oracle solves the loop-closure equation for the follower angle
in closed form (tangent form of the Freudenstein relation) with 40-digit
arithmetic.  The triangle oracle evaluates the wedge relation in
arbitrary precision.
"""

import mpmath as mp

mp.mp.dps = 40


def four_bar_D(g, r, c, s, ground_angle, theta, sign, origin=(0.0, 0.0)):
    """Coupler-follower joint of a four-bar in the world frame.

    Crank pivot at ``origin``, follower pivot ``g`` away along ``ground_angle``.
    ``sign`` selects the assembly with sign(cross(B - C, D - C)) == sign.
    Returns ``(C, D)`` as mpf pairs.
    """
    g, r, c, s = (mp.mpf(v) for v in (g, r, c, s))
    th = mp.mpf(theta) - mp.mpf(ground_angle)   # crank angle relative to ground line
    # local frame: A = 0, B = (g, 0), C = r(cos th, sin th), D = B + s(cos phi, sin phi)
    P = 2 * s * (g - r * mp.cos(th))
    Q = -2 * r * s * mp.sin(th)
    R = c * c - g * g - s * s - r * r + 2 * g * r * mp.cos(th)
    base, spread = mp.atan2(Q, P), mp.acos(R / mp.sqrt(P * P + Q * Q))
    cx, cy = r * mp.cos(th), r * mp.sin(th)
    for phi in (base + spread, base - spread):
        dx, dy = g + s * mp.cos(phi), s * mp.sin(phi)
        cross = (g - cx) * (dy - cy) - (0 - cy) * (dx - cx)
        if mp.sign(cross) == sign:
            break
    else:
        raise ValueError("no assembly on the requested side")
    ca, sa = mp.cos(ground_angle), mp.sin(ground_angle)
    ox, oy = mp.mpf(origin[0]), mp.mpf(origin[1])

    def world(x, y):
        return (ox + ca * x - sa * y, oy + sa * x + ca * y)

    return world(cx, cy), world(dx, dy)


def triangle_output(d_initial, base, hyp, d_in):
    """Output displacement of the wedge triangle at input ``d_in``: tan(half angle) * d_in."""
    d_initial, base, hyp, d_in = (mp.mpf(v) for v in (d_initial, base, hyp, d_in))
    x = (d_in + d_initial - base) / 2
    return x / mp.sqrt(hyp * hyp - x * x) * d_in


def triangle_ma_limit(d_initial, base, hyp):
    """lim d_in -> 0+ of d_in / d_out, by symbolic-precision limit."""
    return mp.limit(lambda d: d / triangle_output(d_initial, base, hyp, d), 0, direction=1)


def random_crank_rocker(rng):
    """Lengths (ground, crank, coupler, follower) of a Grashof crank-rocker whose
    transmission angle stays at least ~18 degrees away from a toggle."""
    while True:
        g, c, s = rng.uniform(20.0, 60.0, 3)
        r = rng.uniform(4.0, 0.6 * min(g, c, s))
        lengths = sorted((g, r, c, s))
        if lengths[0] != r or lengths[0] + lengths[3] >= lengths[1] + lengths[2] - 1.0:
            continue
        worst = max(abs(c * c + s * s - (g - r) ** 2) / (2 * c * s),
                    abs(c * c + s * s - (g + r) ** 2) / (2 * c * s))
        if worst < 0.95:
            return g, r, c, s
