def fill(buf, size):
    for i in range(size):
        buf[i] = i
    return buf
