"""sectorlab - learned market-sector universes.

Clusters companies by their fundamentals into candidate sector universes,
then ranks the universes by backtesting minimum-variance portfolios of
price-weighted synthetic sector ETFs.

Quick Start:
    from sectorlab.ingest import load_fundamentals
    from sectorlab.universes import build_search_space

    table = load_fundamentals("fundamentals.csv")
    space = build_search_space(table.for_year(table.latest_year()))
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
