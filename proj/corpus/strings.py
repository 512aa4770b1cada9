greeting = "hello"
name = 'world'

def shout(msg, n):
    for i in range(n):
        print(msg, i)

print(greeting, name)
shout("again", 2)
print("tab\tand \"quotes\"")
