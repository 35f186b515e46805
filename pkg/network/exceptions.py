class NetworkError(Exception):
    """Base class for message-layer failures"""


class NotNeighbor(NetworkError):
    """A directed message targets a robot that is not a one-hop neighbor"""


class DisconnectedGraph(NetworkError):
    """The communication graph has more than one connected component"""
