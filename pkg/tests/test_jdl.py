import pytest

from lgrid.jobs import (
    JdlError,
    JdlSyntaxError,
    JobDescriptor,
    JobKind,
    ParameterRange,
    VerbatimExpression,
    expand,
    format_jdl,
    parse_jdl,
)


class TestParsing:
    def test_normal_job(self):
        descriptor = parse_jdl('Executable="a.sh"; StdOutput="out.txt"; InputSandbox={"a.sh"};')
        assert descriptor.kind is JobKind.NORMAL
        assert len(descriptor.attributes) == 3
        assert descriptor.get("Executable") == "a.sh"
        assert descriptor.get("InputSandbox") == ["a.sh"]

    def test_parametric_range(self):
        descriptor = parse_jdl(
            'JobType="Parametric"; Executable="run"; Arguments="_PARAM_"; '
            "Parameters=6; ParameterStart=0; ParameterStep=2;"
        )
        assert descriptor.kind is JobKind.PARAMETRIC
        assert descriptor.parameters == ParameterRange(start=0, step=2, bound=6)

    def test_parametric_defaults(self):
        descriptor = parse_jdl('JobType="Parametric"; Executable="run"; Parameters=3;')
        assert descriptor.parameters == ParameterRange(start=0, step=1, bound=3)

    def test_empty_value_is_syntax_error(self):
        with pytest.raises(JdlSyntaxError, match="empty value"):
            parse_jdl("Executable=;")

    def test_missing_executable(self):
        with pytest.raises(JdlError, match="Executable"):
            parse_jdl('StdOutput="x";')

    def test_missing_semicolon_reports_position(self):
        with pytest.raises(JdlSyntaxError, match="line 1"):
            parse_jdl('Executable="a.sh"')

    def test_parametric_without_spec(self):
        with pytest.raises(JdlError, match="Parameters"):
            parse_jdl('JobType="Parametric"; Executable="run";')

    def test_comments_and_case_insensitive_lookup(self):
        descriptor = parse_jdl(
            """
            // job definition
            executable = "a.sh";   # trailing comment
            ARGUMENTS = "1 2 3";
            """
        )
        assert descriptor.get("Executable") == "a.sh"
        assert descriptor.get("arguments") == "1 2 3"

    def test_verbatim_expression_preserved(self):
        text = 'Executable="a"; Requirements = other.GlueCEStateStatus == "Production" && RetryCount > 2;'
        descriptor = parse_jdl(text)
        requirements = descriptor.get("Requirements")
        assert isinstance(requirements, VerbatimExpression)
        assert 'other.GlueCEStateStatus == "Production"' in requirements.text

    def test_booleans_integers_and_escapes(self):
        descriptor = parse_jdl(
            'Executable="a b\\"c"; RetryCount=3; MyProxyRenewal=true; Flag=false;'
        )
        assert descriptor.get("Executable") == 'a b"c'
        assert descriptor.get("RetryCount") == 3
        assert descriptor.get("MyProxyRenewal") is True
        assert descriptor.get("Flag") is False

    def test_collection_with_nodes(self):
        descriptor = parse_jdl(
            """
            Type = "Collection";
            Nodes = {
                [ Executable = "one.sh"; ],
                [ Executable = "two.sh"; Arguments = "x"; ]
            };
            """
        )
        assert descriptor.kind is JobKind.COLLECTION
        assert [n.get("Executable") for n in descriptor.nodes] == ["one.sh", "two.sh"]

    def test_collection_requires_nodes(self):
        with pytest.raises(JdlError, match="Nodes"):
            parse_jdl('Type="Collection";')

    def test_collection_rejects_top_level_executable(self):
        with pytest.raises(JdlError, match="top-level Executable"):
            parse_jdl('Type="Collection"; Executable="x"; Nodes={[Executable="y";]};')

    def test_unknown_attributes_preserved(self):
        descriptor = parse_jdl('Executable="a"; WhateverCustom="kept";')
        assert descriptor.get("WhateverCustom") == "kept"

    def test_format_parse_roundtrip(self):
        original = parse_jdl(
            'Executable="a.sh"; Arguments="_PARAM_ x"; RetryCount=2; Flags={true, false}; '
            'InputSandbox={"a.sh", "b.dat"};'
        )
        again = parse_jdl(format_jdl(original))
        assert again.attributes == original.attributes


def brute_force_range(start, step, bound):
    # independent oracle: enumerate explicitly rather than via ParameterRange
    values = []
    v = start
    while v < bound:
        values.append(v)
        v += step
    return values


class TestExpansion:
    def test_normal_expands_to_itself(self):
        descriptor = parse_jdl('Executable="a";')
        assert expand(descriptor) == [descriptor]

    def test_parametric_range_expansion(self):
        descriptor = parse_jdl(
            'JobType="Parametric"; Executable="run"; Arguments="_PARAM_"; '
            "Parameters=6; ParameterStart=0; ParameterStep=2;"
        )
        jobs = expand(descriptor)
        assert [j.get("Arguments") for j in jobs] == [str(v) for v in brute_force_range(0, 2, 6)]
        assert len(jobs) == 3
        assert all(j.kind is JobKind.NORMAL for j in jobs)
        assert all(not j.has("Parameters") for j in jobs)

    def test_explicit_list_expansion(self):
        descriptor = parse_jdl(
            'JobType="Parametric"; Executable="run"; Arguments="_PARAM_"; '
            'Parameters={"alpha", "beta"};'
        )
        jobs = expand(descriptor)
        assert [j.get("Arguments") for j in jobs] == ["alpha", "beta"]

    def test_substitution_reaches_lists(self):
        descriptor = parse_jdl(
            'JobType="Parametric"; Executable="run"; InputSandbox={"data._PARAM_.in"}; Parameters=2;'
        )
        jobs = expand(descriptor)
        assert jobs[0].get("InputSandbox") == ["data.0.in"]
        assert jobs[1].get("InputSandbox") == ["data.1.in"]

    def test_collection_concatenates_node_expansions(self):
        text = """
        Type = "Collection";
        Nodes = {
            [ Executable = "plain.sh"; ],
            [ JobType = "Parametric"; Executable = "par.sh"; Arguments = "_PARAM_";
              Parameters = 6; ParameterStart = 0; ParameterStep = 2; ]
        };
        """
        descriptor = parse_jdl(text)
        jobs = expand(descriptor)
        # oracle: expand each node independently and sum
        expected = len(expand(descriptor.nodes[0])) + len(expand(descriptor.nodes[1]))
        assert expected == 1 + len(brute_force_range(0, 2, 6)) == 4
        assert len(jobs) == expected
        assert [j.get("Executable") for j in jobs] == ["plain.sh", "par.sh", "par.sh", "par.sh"]

    def test_expansion_is_deterministic(self):
        descriptor = parse_jdl(
            'JobType="Parametric"; Executable="run"; Arguments="_PARAM_"; Parameters=5;'
        )
        first = [(j.attributes) for j in expand(descriptor)]
        second = [(j.attributes) for j in expand(descriptor)]
        assert first == second

    def test_bad_step_rejected(self):
        with pytest.raises(JdlError, match="ParameterStep"):
            parse_jdl('JobType="Parametric"; Executable="r"; Parameters=6; ParameterStep=0;')

    def test_bound_below_start_rejected(self):
        with pytest.raises(JdlError, match="bound"):
            parse_jdl(
                'JobType="Parametric"; Executable="r"; Parameters=2; ParameterStart=5;'
            )

    def test_empty_list_rejected(self):
        with pytest.raises(JdlError, match="empty"):
            parse_jdl('JobType="Parametric"; Executable="r"; Parameters={};')

    def test_empty_collection_rejected(self):
        with pytest.raises(JdlError):
            parse_jdl('Type="Collection"; Nodes={};')
