def parse(text):
    try:
        value = int(text)
    except ValueError:
        value = 0
    finally:
        done = True
    return value
