def classify(n):
    if n < 0:
        return -1
    elif n == 0:
        return 0
    elif n < 10:
        return 1
    else:
        return 2

vals = [-5, 0, 3, 42]
for i in range(len(vals)):
    print(vals[i], classify(vals[i]))
