import pytest

from lgrid.pki import TrustStore
from lgrid.pki.identity import Identity, create_ca, issue_user_cert


@pytest.fixture(scope="session")
def ca() -> Identity:
    return create_ca()


@pytest.fixture(scope="session")
def alice(ca) -> Identity:
    return issue_user_cert(ca, "/C=IT/O=Test/CN=Alice")


@pytest.fixture(scope="session")
def bob(ca) -> Identity:
    return issue_user_cert(ca, "/C=IT/O=Test/CN=Bob")


@pytest.fixture(scope="session")
def trust(ca) -> TrustStore:
    return TrustStore(anchors=[ca.cert])
