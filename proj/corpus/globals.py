total = 0
calls = 0

def add(x):
    global total, calls
    total = total + x
    calls = calls + 1

def report():
    print("total", total, "calls", calls)

for i in range(5):
    add(i * 3)
report()
add(-100)
report()
