import sys
from pathlib import Path

# make the sibling oracles module importable under any pytest import mode
sys.path.insert(0, str(Path(__file__).parent))
