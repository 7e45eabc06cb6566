def greet(name, greeting="hi"):
    message = greeting + name
    return message
