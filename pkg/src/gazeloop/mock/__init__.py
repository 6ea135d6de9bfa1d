from .corpus import MockCorpus
from .tools import FaultInjector, MockChatClient, MockPageReader, MockSearchProvider, MockToolSuite

__all__ = [
    "MockCorpus",
    "FaultInjector",
    "MockChatClient",
    "MockPageReader",
    "MockSearchProvider",
    "MockToolSuite",
]
