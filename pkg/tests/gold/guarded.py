def guarded(path):
    handle = open(path)
    try:
        data = handle.read()
    finally:
        handle.close()
    return data
