"""Export commodity portfolio analysis: shares, GDP elasticities, clustering
and cluster transitions over a country-year trade panel."""

__version__ = "0.1.0"
