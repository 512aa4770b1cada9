# A dynamic function deletes its own binding while executing.
@dynamic
def once(x):
    global once
    del(once)
    return x + 100

@dynamic
def twice(x):
    return 2 * x

print(once(1))
print(twice(21))
del(twice)
print("done")
