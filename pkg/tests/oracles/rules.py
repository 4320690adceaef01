# Edge-rule table written out independently of the package.
ALLOWED = {
    ("Process", "File"): {"read", "write"},
    ("Process", "Network"): {"connect", "send", "recv"},
    ("File", "Process"): {"exec", "load"},
    ("Process", "Process"): {"fork", "clone"},
}


def is_allowed(src_kind, dst_kind, label):
    return label in ALLOWED.get((str(src_kind), str(dst_kind)), set())
