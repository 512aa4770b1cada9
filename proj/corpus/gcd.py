def gcd(a, b):
    while b != 0:
        t = b
        b = a % b
        a = t
    return a

def lcm(a, b):
    return a // gcd(a, b) * b

print(gcd(48, 18), lcm(4, 6), gcd(17, 5), lcm(21, 6))
