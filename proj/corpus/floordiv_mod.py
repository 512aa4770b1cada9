vals = [7, -7, 13, -13, 0]
divs = [2, -2, 5, -5]
for i in range(len(vals)):
    for j in range(len(divs)):
        print(vals[i], divs[j], vals[i] // divs[j], vals[i] % divs[j])
print(-1 // 3, -1 % 3)
