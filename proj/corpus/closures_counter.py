# Counter closure mutated through nonlocal.
def make_and_use(start, times):
    count = start

    def bump(by):
        nonlocal count
        count = count + by
        return count

    total = 0
    for i in range(times):
        total = total + bump(i)
    print("count", count, "total", total)
    return total

print(make_and_use(10, 5))
print(make_and_use(-3, 4))
