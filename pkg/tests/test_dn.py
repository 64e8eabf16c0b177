import pytest
from hypothesis import given
from hypothesis import strategies as st

from lgrid.pki import DistinguishedName, DnParseError, derive_user_id, format_dn, parse_dn


def test_parse_basic():
    dn = parse_dn("/C=IT/O=Test/CN=Alice")
    assert dn.rdns == (("C", "IT"), ("O", "Test"), ("CN", "Alice"))


def test_parse_single_rdn():
    assert parse_dn("/CN=Bob").rdns == (("CN", "Bob"),)


def test_empty_value_rejected():
    with pytest.raises(DnParseError, match="CN="):
        parse_dn("/C=IT/CN=")


def test_segment_without_equals_rejected():
    with pytest.raises(DnParseError, match="without '='"):
        parse_dn("/C=IT/bogus")


def test_unknown_attribute_rejected():
    with pytest.raises(DnParseError, match="unknown attribute"):
        parse_dn("/C=IT/XX=nope")


def test_must_start_with_slash():
    with pytest.raises(DnParseError):
        parse_dn("CN=Alice")


def test_empty_text_rejected():
    with pytest.raises(DnParseError):
        parse_dn("")


def test_format_escapes_slash_and_backslash():
    dn = DistinguishedName((("CN", "a/b\\c"),))
    text = format_dn(dn)
    assert text == "/CN=a\\/b\\\\c"
    assert parse_dn(text) == dn


def test_extends_by_one_cn():
    base = parse_dn("/C=IT/CN=Alice")
    assert parse_dn("/C=IT/CN=Alice/CN=12345").extends_by_one_cn(base)
    assert not parse_dn("/C=IT/CN=Alice/CN=1/CN=2").extends_by_one_cn(base)
    assert not parse_dn("/C=IT/CN=Mallory/CN=12345").extends_by_one_cn(base)
    assert not parse_dn("/C=IT/CN=Alice/OU=extra").extends_by_one_cn(base)


def test_parent_strips_terminal_rdn():
    dn = parse_dn("/C=IT/CN=Alice/CN=99")
    assert dn.parent() == parse_dn("/C=IT/CN=Alice")


ATTRS = st.sampled_from(["C", "O", "OU", "CN", "L", "ST", "DC", "emailAddress"])
VALUES = st.text(min_size=1, max_size=20).filter(lambda s: s.strip() == s and s)


@given(st.lists(st.tuples(ATTRS, VALUES), min_size=1, max_size=6))
def test_roundtrip_identity(rdns):
    dn = DistinguishedName(tuple(rdns))
    assert parse_dn(format_dn(dn)) == dn


def test_user_id_deterministic():
    dn = parse_dn("/C=IT/O=Test/CN=Alice")
    assert derive_user_id(dn) == derive_user_id(parse_dn("/C=IT/O=Test/CN=Alice"))


def test_user_id_distinct_for_distinct_dns():
    assert derive_user_id(parse_dn("/CN=Alice")) != derive_user_id(parse_dn("/CN=Bob"))


def test_user_id_golden_value():
    # frozen from: printf '/C=IT/O=Test/CN=Alice' | sha256sum | cut -c1-32
    assert derive_user_id(parse_dn("/C=IT/O=Test/CN=Alice")) == "7d8a605f55a31bbf660ea897aa761449"


def test_user_id_is_filesystem_safe():
    uid = derive_user_id(parse_dn("/CN=weird\\/name"))
    assert len(uid) == 32
    assert all(c in "0123456789abcdef" for c in uid)


def test_x509_name_roundtrip():
    dn = parse_dn("/C=IT/O=Test/OU=Lab/CN=Alice")
    assert DistinguishedName.from_x509_name(dn.to_x509_name()) == dn
