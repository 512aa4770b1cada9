def is_even(n):
    if n == 0:
        return 1
    return is_odd(n - 1)

def is_odd(n):
    if n == 0:
        return 0
    return is_even(n - 1)

for n in range(10):
    print(n, is_even(n), is_odd(n))
print(is_even(10))
