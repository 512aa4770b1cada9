# One-dimensional Jacobi relaxation for the Laplace equation.
# Boundaries: u[0] = 0, u[NX + 1] = 1. The printed value is the sum of
# squared discrete second differences over the interior after MAX_ITERS
# sweeps.
NX = 100
MAX_ITERS = 10000
REPORT = 0

def average(left, right):
    return (left + right) * 0.5

def init(u, n):
    for i in range(n + 2):
        u[i] = 0.0
    u[n + 1] = 1.0

def sweep(u, unew, n):
    for i in range(1, n + 1):
        unew[i] = average(u[i - 1], u[i + 1])

def residual(u, n):
    total = 0.0
    for i in range(1, n + 1):
        d = u[i - 1] - 2.0 * u[i] + u[i + 1]
        total = total + d * d
    return total

def jacobi(n, iters):
    u = [0.0] * (n + 2)
    unew = [0.0] * (n + 2)
    init(u, n)
    init(unew, n)
    mark("start")
    k = 0
    while k < iters:
        sweep(u, unew, n)
        tmp = u
        u = unew
        unew = tmp
        k = k + 1
        if REPORT:
            print(k, residual(u, n))
    mark("stop")
    return residual(u, n)

print(jacobi(NX, MAX_ITERS))
