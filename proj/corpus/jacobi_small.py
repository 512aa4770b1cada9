# Small one-dimensional Jacobi relaxation with per-iteration output.
def relax(n, iters):
    u = [0.0] * (n + 2)
    v = [0.0] * (n + 2)
    u[n + 1] = 1.0
    v[n + 1] = 1.0
    for k in range(iters):
        for i in range(1, n + 1):
            v[i] = (u[i - 1] + u[i + 1]) * 0.5
        t = u
        u = v
        v = t
        print(k, u[1], u[n])
    return u

print(relax(4, 5))
