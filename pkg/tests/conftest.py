import pytest

from hybridits.channels import CoverageModel
from hybridits.core_model import GeoPosition, NodeKind, Plane, World, register_node
from hybridits.credentials import (
    EnrollmentAuthority,
    PseudonymAuthority,
    PseudonymPolicy,
    PseudonymWallet,
    TrustAnchors,
    enroll,
)
from hybridits.core_model import LEGAL_PLANE
from hybridits.network_plane import ServiceDescriptor, ServiceRegistry, SystemsNetwork
from hybridits.privacy.model import DataSchema
from hybridits.privacy.rights import ProviderStore


class Testbed:
    """A world with authorities and a systems network, built up node by node."""

    __test__ = False

    def __init__(self, seed=7, coverage=None, policy=None):
        self.world = World(seed)
        self.coverage = coverage or CoverageModel()
        self.policy = policy or PseudonymPolicy.per_service()
        register_node(self.world, NodeKind.GOVERNANCE_AUTHORITY, Plane.BACKEND, GeoPosition(0, 0), "ea")
        register_node(self.world, NodeKind.GOVERNANCE_AUTHORITY, Plane.BACKEND, GeoPosition(0, 0), "pa")
        self.ea = EnrollmentAuthority("ea", self.world.node("ea").platform, self.world)
        self.pa = PseudonymAuthority("pa", self.world.node("pa").platform, self.ea)
        self.anchors = TrustAnchors.of(self.pa)
        self.registry = ServiceRegistry(self.ea.public_key, self.ea.crl)
        self.enrollments = {}
        self.wallets = {}
        self.network = None

    def add(self, node_id, kind, position, at=0):
        register_node(self.world, kind, LEGAL_PLANE[kind], position, node_id)
        node = self.world.node(node_id)
        self.enrollments[node_id] = enroll(self.ea, node, at)
        self.wallets[node_id] = PseudonymWallet.provision(node, self.policy, self.pa, self.enrollments[node_id], at)
        return node

    def service(self, service_id, provider, msg_class, purpose, fields=(), address=None, settings=()):
        schema = DataSchema(purpose, frozenset(fields) | frozenset(settings))
        self.registry.register(
            ServiceDescriptor(service_id, provider, msg_class, schema, self.enrollments[provider], address), at=0
        )
        net = self.net()
        if schema.personal:
            net.stores[service_id] = ProviderStore(
                service_id, provider, schema, self.anchors, net.log_for(provider), frozenset(settings)
            )
        return self.registry.get(service_id)

    def net(self):
        if self.network is None:
            self.network = SystemsNetwork(self.world, self.coverage, self.registry, self.anchors, self.wallets)
        return self.network


@pytest.fixture
def testbed():
    return Testbed()
