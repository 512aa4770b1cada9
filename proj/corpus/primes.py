def sieve(limit):
    flags = [1] * (limit + 1)
    flags[0] = 0
    flags[1] = 0
    p = 2
    while p * p <= limit:
        if flags[p]:
            m = p * p
            while m <= limit:
                flags[m] = 0
                m = m + p
        p = p + 1
    count = 0
    for i in range(limit + 1):
        if flags[i]:
            count = count + 1
    return count

print(sieve(10), sieve(100), sieve(1000))
