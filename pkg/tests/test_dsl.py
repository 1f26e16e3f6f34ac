import pytest

from tweezersim.dsl import (LoadAtoms, MergeRadial, RampVDT, Sequence,
                            SequenceRangeError, SequenceSyntaxError,
                            TransportHDT, parse_sequence, render_sequence)


class TestParsing:
    def test_transport_line(self):
        seq = parse_sequence("transport_hdt atom=2 y=15.0 dur=0.0005\n")
        assert seq.steps == (TransportHDT(atom=2, target_y=15.0,
                                          duration=0.0005),)

    def test_empty_input_is_valid_empty_sequence(self):
        seq = parse_sequence("")
        assert seq == Sequence(steps=())

    def test_comments_and_blank_lines_ignored(self):
        text = """
        # a comment line

        load_atoms count=2 spread=80   # trailing comment
        """
        seq = parse_sequence(text)
        assert seq.steps == (LoadAtoms(count=2, spread=80.0),)

    def test_directives_set_metadata(self):
        seq = parse_sequence("@name demo\n@target_distance 15.0\n"
                             "merge_radial dur=0.05\n")
        assert seq.name == "demo"
        assert seq.target_distance == 15.0
        assert seq.steps == (MergeRadial(duration=0.05),)

    def test_key_order_does_not_matter(self):
        a = parse_sequence("transport_hdt y=1.0 dur=0.001 atom=1")
        b = parse_sequence("transport_hdt atom=1 y=1.0 dur=0.001")
        assert a == b


class TestSyntaxErrors:
    def test_unknown_step_reports_line_and_token(self):
        with pytest.raises(SequenceSyntaxError) as err:
            parse_sequence("image exposure=1.0\nwobble dur=1\n")
        assert err.value.line == 2
        assert err.value.token == "wobble"

    def test_missing_key(self):
        with pytest.raises(SequenceSyntaxError, match="missing key"):
            parse_sequence("transport_hdt atom=1 dur=0.001")

    def test_unknown_key(self):
        with pytest.raises(SequenceSyntaxError, match="unknown key"):
            parse_sequence("image exposure=1.0 gain=3")

    def test_duplicate_key(self):
        with pytest.raises(SequenceSyntaxError, match="duplicate"):
            parse_sequence("image exposure=1.0 exposure=2.0")

    def test_non_numeric_value_reports_column(self):
        with pytest.raises(SequenceSyntaxError) as err:
            parse_sequence("image exposure=fast")
        assert err.value.line == 1
        assert err.value.column == 7

    def test_bare_token(self):
        with pytest.raises(SequenceSyntaxError, match="key=value"):
            parse_sequence("image 1.0")

    def test_unknown_directive(self):
        with pytest.raises(SequenceSyntaxError, match="directive"):
            parse_sequence("@speed 3")


class TestRangeErrors:
    @pytest.mark.parametrize("line,needle", [
        ("load_atoms count=0 spread=80", "count"),
        ("load_atoms count=2 spread=-1", "spread"),
        ("image exposure=0", "exposure"),
        ("transport_hdt atom=0 y=1.0 dur=0.001", "atom"),
        ("transport_hdt atom=1 y=1.0 dur=0", "dur"),
        ("extract_vdt atom=1 lift=57 dur=-0.1", "dur"),
        ("tilt_hdt dx=55 dur=0.05", "|dx| <= 40"),
        ("tilt_hdt dx=-42 dur=0.05", "|dx| <= 40"),
        ("transport_vdt z=75 dur=0.03", "|z| <= 60"),
        ("merge_radial dur=0.0", "dur"),
        ("ramp_vdt scale=1.5 dur=0.05", "scale"),
        ("ramp_vdt scale=-0.2 dur=0.05", "scale"),
        ("molasses dur=-1", "dur"),
    ])
    def test_bound_violations_name_the_bound(self, line, needle):
        with pytest.raises(SequenceRangeError) as err:
            parse_sequence(line)
        assert needle in str(err.value)

    def test_boundary_values_allowed(self):
        parse_sequence("tilt_hdt dx=40 dur=0.05")
        parse_sequence("tilt_hdt dx=-40 dur=0.05")
        parse_sequence("transport_vdt z=60 dur=0.03")
        parse_sequence("ramp_vdt scale=1.0 dur=0.05")
        parse_sequence("ramp_vdt scale=0.0 dur=0.05")


ALL_VARIANTS = """\
@name round-trip
@target_distance 15.0
load_atoms count=2 spread=80.0
image exposure=1.0
transport_hdt atom=1 y=0.0 dur=0.0005
extract_vdt atom=1 lift=57.0 dur=0.03
tilt_hdt dx=30.0 dur=0.05
transport_vdt z=0.0 dur=0.03
merge_radial dur=0.05
ramp_vdt scale=0.0 dur=0.05
molasses dur=1.0
"""


class TestRoundTrip:
    def test_render_parse_round_trip_all_variants(self):
        seq = parse_sequence(ALL_VARIANTS)
        assert len(seq.steps) == 9
        again = parse_sequence(render_sequence(seq))
        assert again == seq

    def test_round_trip_is_whitespace_insensitive(self):
        noisy = ALL_VARIANTS.replace(" ", "   ").replace("\n", "\n\n")
        assert parse_sequence(noisy) == parse_sequence(ALL_VARIANTS)

    def test_render_preserves_float_values_exactly(self):
        seq = parse_sequence("transport_hdt atom=1 y=14.896000000000001 "
                             "dur=0.0005")
        again = parse_sequence(render_sequence(seq))
        assert again.steps[0].target_y == seq.steps[0].target_y

    def test_packaged_sequences_round_trip(self):
        import tweezersim as tw
        for name in ("rearrange_15um.seq", "join_same_well.seq",
                     "control_extracted_atom.seq",
                     "control_stationary_atom.seq"):
            text = tw.packaged_sequence(name).read_text(encoding="utf-8")
            seq = parse_sequence(text)
            assert parse_sequence(render_sequence(seq)) == seq


class TestSequenceHelpers:
    def test_last_manipulation_index(self):
        seq = parse_sequence(ALL_VARIANTS)
        # ramp_vdt is the last manipulation; molasses follows it
        assert seq.steps[seq.last_manipulation_index()].kind == "ramp_vdt"
        assert parse_sequence("image exposure=1.0").last_manipulation_index() == -1
