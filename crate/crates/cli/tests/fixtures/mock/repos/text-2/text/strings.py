def shout(s):
    return s.lower() + "!"


def whisper(s):
    return s.upper() + "..."


def plain(s):
    return s
