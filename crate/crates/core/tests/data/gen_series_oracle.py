"""Frozen reference values for the Tweedie series normalizer.

Each row holds (y, phi, zeta, c) where c = log[(1/y) * sum_j W_j] is summed
term by term in 60-digit arithmetic over j = 1..J with J chosen far past the
mode, independently of the library's outward-from-the-mode truncation.
"""
import random
import mpmath as mp

mp.mp.dps = 60


def normalizer(y, phi, zeta):
    y, phi, zeta = mp.mpf(y), mp.mpf(phi), mp.mpf(zeta)
    alpha = (2 - zeta) / (zeta - 1)
    mode = float(y ** (2 - zeta) / ((2 - zeta) * phi))
    upper = int(max(200, 4 * mode + 60 * (mode ** 0.5) + 200))
    total = mp.mpf(0)
    for j in range(1, upper + 1):
        log_term = (j * alpha * mp.log(y) - j * (1 + alpha) * mp.log(phi)
                    - j * mp.log(2 - zeta) - j * alpha * mp.log(zeta - 1)
                    - mp.loggamma(j + 1) - mp.loggamma(j * alpha))
        total += mp.e ** log_term
    return mp.log(total) - mp.log(y)


def main():
    rng = random.Random(20240611)
    rows = []
    for _ in range(200):
        y = 10 ** rng.uniform(-2, 2)
        phi = 10 ** rng.uniform(-2, 1)
        zeta = rng.uniform(1.05, 1.95)
        rows.append((y, phi, zeta))
    with open("series_oracle.csv", "w") as out:
        out.write("y,phi,zeta,log_normalizer\n")
        for y, phi, zeta in rows:
            c = normalizer(repr(y), repr(phi), repr(zeta))
            out.write(f"{y!r},{phi!r},{zeta!r},{mp.nstr(c, 25)}\n")


if __name__ == "__main__":
    main()
