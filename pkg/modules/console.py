"""
Terminal colors and status line helpers
"""


class Colors:
    RED = '\033[91m'
    GREEN = '\033[92m'
    YELLOW = '\033[93m'
    BLUE = '\033[94m'
    MAGENTA = '\033[95m'
    CYAN = '\033[96m'
    RESET = '\033[0m'
    BOLD = '\033[1m'


def info(message: str):
    print(f"{Colors.BLUE}[*] {message}{Colors.RESET}")


def success(message: str):
    print(f"{Colors.GREEN}[+] {message}{Colors.RESET}")


def warning(message: str):
    print(f"{Colors.YELLOW}[!] {message}{Colors.RESET}")


def failure(message: str):
    print(f"{Colors.RED}[!] {message}{Colors.RESET}")
