#!/usr/bin/env python3
"""
Decay Lab
Long-time decay experiments for degenerate convection-diffusion equations
u_t + div phi(u) = A(u)_xx with periodic plus vanishing initial data
"""

import sys

from modules.harness import cli_main


def main(argv=None):
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
