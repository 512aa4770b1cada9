# Nesting depth four: maximum lexical levels is five.
def l1(a):
    def l2(b):
        def l3(c):
            def l4(d):
                return a * 1000 + b * 100 + c * 10 + d
            return l4(c + 1)
        return l3(b + 1)
    return l2(a + 1)

print(l1(1))
print(l1(5))
