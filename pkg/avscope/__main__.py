import sys

from avscope.interfaces.interface_cli import main

sys.exit(main())
