import itertools
import json
import random
from datetime import date

import pytest

from implantlink.access import (
    AccessDenied,
    AccessEngine,
    AuditLog,
    CredentialDirectory,
    Role,
)
from implantlink.clock import VirtualClock
from implantlink.sections import Section
from implantlink.store import (
    DigitalObject,
    DuplicateLink,
    MappingSpec,
    MissingRequiredField,
    NotFound,
    ObjectStore,
    StaleWrite,
    StoreError,
    UnitConversionError,
    UnknownField,
    harmonize,
)
from implantlink.udi import LinkageRecord, UdiRecord


@pytest.fixture
def world(tmp_path):
    clock = VirtualClock(1_600_000_000.0)
    directory = CredentialDirectory()
    directory.register("erika", "pw", Role.USER, name="Erika Musterfrau",
                       birthdate="1975-04-12", address="Musterweg 1, Dresden")
    directory.register("hans", "pw", Role.USER, name="Hans Beispiel",
                       birthdate="1960-11-02", address="Beispielallee 9, Chemnitz")
    directory.register("dr-gruber", "pw", Role.MEDICAL_STAFF, name="Dr. Gruber")
    directory.register("orthofab", "pw", Role.PRODUCER, name="OrthoFab GmbH")
    engine = AccessEngine("key", directory, AuditLog(), clock)
    store = ObjectStore(tmp_path / "journal.jsonl", engine)
    return clock, engine, store


def staff(engine):
    return engine.issue_session("dr-gruber", Role.MEDICAL_STAFF)


def producer(engine):
    return engine.issue_session("orthofab", Role.PRODUCER)


def patient(engine, who="erika"):
    return engine.issue_session(who, Role.USER)


def implant_object(object_id="implant-1", producer_id="orthofab", **technical):
    technical.setdefault("udi", "(01)04012345678901(11)210301(17)310301(10)L42(21)SN007")
    return DigitalObject(
        object_id=object_id,
        kind="implant",
        metadata={"producer_id": producer_id, "lot": "L42", "serial": "SN007"},
        sections={Section.TECHNICAL: technical},
    )


def patient_object(object_id="erika"):
    return DigitalObject(
        object_id=object_id,
        kind="patient",
        metadata={"patient_id": object_id, "name": "Erika Musterfrau",
                  "birthdate": "1975-04-12", "address": "Musterweg 1, Dresden"},
        sections={Section.MEDICAL: {"follow_ups": []}, Section.SOCIAL: {"heart_rate_series": []}},
    )


class TestPutGet:
    def test_fresh_implant_by_producer_is_version_1(self, world):
        _, engine, store = world
        version = store.put_object(implant_object(), producer(engine))
        assert version == 1

    def test_producer_cannot_write_medical(self, world):
        _, engine, store = world
        obj = DigitalObject(
            object_id="x", kind="patient",
            sections={Section.MEDICAL: {"follow_ups": ["f1"]}},
        )
        with pytest.raises(AccessDenied):
            store.put_object(obj, producer(engine))

    def test_patient_reads_own_object_fully(self, world):
        _, engine, store = world
        store.put_object(patient_object(), staff(engine))
        view = store.get_object("erika", patient(engine))
        assert set(view.sections) == {Section.MEDICAL, Section.SOCIAL}

    def test_producer_reading_patient_denied(self, world):
        _, engine, store = world
        store.put_object(patient_object(), staff(engine))
        with pytest.raises(AccessDenied):
            store.get_object("erika", producer(engine))

    def test_staff_sees_implant_technical(self, world):
        _, engine, store = world
        store.put_object(implant_object(), producer(engine))
        view = store.get_object("implant-1", staff(engine))
        assert Section.TECHNICAL in view.sections

    def test_round_trip_verbatim(self, world):
        _, engine, store = world
        obj = patient_object()
        store.put_object(obj, staff(engine))
        view = store.get_object("erika", staff(engine))
        assert view.sections == obj.sections
        assert view.metadata == obj.metadata

    def test_get_missing(self, world):
        _, engine, store = world
        with pytest.raises(NotFound):
            store.get_object("ghost", staff(engine))

    def test_wrong_section_field_rejected(self):
        with pytest.raises(StoreError):
            DigitalObject(
                object_id="x", kind="patient",
                sections={Section.MEDICAL: {"heart_rate_series": []}},
            )

    def test_stale_write_rejected(self, world):
        clock, engine, store = world
        obj = implant_object()
        store.put_object(obj, producer(engine))
        clock.advance(10)
        newer = obj.copy()
        newer.version = 2
        newer.sections[Section.TECHNICAL]["post_treatment"] = {"hip": True}
        store.put_object(newer, producer(engine))
        stale = obj.copy()
        stale.version = 2
        with pytest.raises(StaleWrite):
            store.put_object(stale, producer(engine), timestamp=clock.now() - 5)

    def test_version_never_decreases(self, world):
        clock, engine, store = world
        obj = implant_object()
        versions = []
        for v in (1, 2, 3):
            obj = obj.copy()
            obj.version = v
            clock.advance(1)
            versions.append(store.put_object(obj, producer(engine)))
        assert versions == sorted(versions)
        with pytest.raises(StaleWrite):
            rollback = obj.copy()
            rollback.version = 2
            store.put_object(rollback, producer(engine))


class TestConvergence:
    def test_concurrent_interleavings_converge(self, world):
        clock, engine, store = world
        base = implant_object()
        store.put_object(base, producer(engine))

        a = base.copy()
        a.version = 2
        a.sections[Section.TECHNICAL]["surface_roughness_um"] = 3.2
        b = base.copy()
        b.version = 2
        b.sections[Section.TECHNICAL]["surface_roughness_um"] = 4.8

        finals = []
        for first, second in itertools.permutations([(a, 100.0), (b, 200.0)]):
            replay = ObjectStore(None, engine)
            obj0 = base.copy()
            replay.put_object(obj0, producer(engine), timestamp=50.0)
            for write, ts in (first, second):
                try:
                    replay.put_object(write.copy(), producer(engine), timestamp=ts)
                except StaleWrite:
                    pass
            finals.append(replay.get_raw("implant-1").to_json())
        assert finals[0] == finals[1]
        assert finals[0]["sections"]["technical_focus"]["surface_roughness_um"] == 4.8

    def test_journal_replay_rebuilds_state(self, world, tmp_path):
        clock, engine, store = world
        store.put_object(patient_object(), staff(engine))
        clock.advance(1)
        store.put_object(implant_object(), producer(engine))
        rec = LinkageRecord(
            udi=UdiRecord("04012345678901", date(2021, 3, 1), date(2031, 3, 1), "L42", "SN007"),
            patient_id="erika", surgery_id="surgery-1", linked_at=clock.now(), linked_by="dr-gruber",
        )
        store.add_linkage(rec)
        reloaded = ObjectStore(store.journal_path, engine)
        assert {k: v.to_json() for k, v in reloaded.objects.items()} == {
            k: v.to_json() for k, v in store.objects.items()
        }
        assert reloaded.linkages_by_serial.keys() == store.linkages_by_serial.keys()

    def test_tombstone_wins_over_older_put(self, world):
        clock, engine, store = world
        obj = implant_object()
        store.put_object(obj, producer(engine))
        clock.advance(5)
        store.delete_object("implant-1", producer(engine), version=2)
        with pytest.raises(NotFound):
            store.get_object("implant-1", staff(engine))
        resurrect = obj.copy()
        resurrect.version = 2
        with pytest.raises(StaleWrite):
            store.put_object(resurrect, producer(engine), timestamp=clock.now() - 10)


class TestQuery:
    def seed(self, world):
        clock, engine, store = world
        store.put_object(patient_object(), staff(engine))
        store.put_object(implant_object(), producer(engine))
        other = implant_object(object_id="implant-2")
        other.metadata["lot"] = "L43"
        other.metadata["serial"] = "SN008"
        store.put_object(other, producer(engine))
        return store

    def test_filter_by_kind_and_lot(self, world):
        _, engine, store = world
        self.seed(world)
        hits = store.query_metadata({"kind": "implant", "lot": "L42"}, staff(engine))
        assert [o.object_id for o in hits] == ["implant-1"]

    def test_empty_filter_returns_all_readable(self, world):
        _, engine, store = world
        self.seed(world)
        assert len(store.query_metadata({}, staff(engine))) == 3
        # producer sees only its device objects
        assert {o.object_id for o in store.query_metadata({}, producer(engine))} == {
            "implant-1", "implant-2",
        }

    def test_matches_brute_force_scan(self, world):
        _, engine, store = world
        rng = random.Random(3)
        for i in range(100):
            obj = implant_object(object_id=f"imp-{i:03d}")
            obj.metadata["lot"] = f"L{rng.randrange(5)}"
            obj.metadata["serial"] = f"S{i:03d}"
            store.put_object(obj, producer(engine))
        reader = staff(engine)
        for lot in ("L0", "L3", "L9"):
            fast = [o.object_id for o in store.query_metadata({"lot": lot}, reader)]
            slow = sorted(
                o.object_id for o in store.objects.values() if o.metadata.get("lot") == lot
            )
            assert fast == slow


class TestHarmonize:
    WEIGHT_SPEC = MappingSpec(
        source_name="scale-feed",
        target_section=Section.SOCIAL,
        field_maps=(("gewicht_lb", "weight_kg", "lb_to_kg"),),
        required_fields=("weight_kg",),
    )

    def test_pound_conversion(self):
        out = harmonize({"gewicht_lb": 154}, self.WEIGHT_SPEC)
        assert out["weight_kg"] == pytest.approx(154 * 0.45359237)
        assert out["weight_kg"] == pytest.approx(69.853, abs=1e-3)

    def test_missing_required(self):
        spec = MappingSpec(
            source_name="feed",
            target_section=Section.TECHNICAL,
            field_maps=(("seriennummer", "udi", None), ("stammdaten", "device_master", None)),
            required_fields=("udi",),
        )
        with pytest.raises(MissingRequiredField):
            harmonize({"stammdaten": {"model": "hip-7"}}, spec)

    def test_identity_mapping(self):
        spec = MappingSpec(
            source_name="id",
            target_section=Section.SOCIAL,
            field_maps=(("weight_kg", "weight_kg", None),),
        )
        assert harmonize({"weight_kg": 70.0}, spec) == {"weight_kg": 70.0}

    def test_unknown_source_field(self):
        with pytest.raises(UnknownField):
            harmonize({"mystery": 1}, self.WEIGHT_SPEC)

    def test_unknown_canonical_field_rejected_at_validate(self):
        spec = MappingSpec(
            source_name="bad",
            target_section=Section.SOCIAL,
            field_maps=(("x", "not_a_field", None),),
        )
        with pytest.raises(UnknownField):
            spec.validate()

    def test_non_numeric_conversion_input(self):
        with pytest.raises(UnitConversionError):
            harmonize({"gewicht_lb": "heavy"}, self.WEIGHT_SPEC)


class TestLinkage:
    def make_record(self, serial="SN007", patient_id="erika"):
        return LinkageRecord(
            udi=UdiRecord("04012345678901", date(2021, 3, 1), date(2031, 3, 1), "L42", serial),
            patient_id=patient_id, surgery_id="surgery-1", linked_at=0.0, linked_by="dr-gruber",
        )

    def test_duplicate_serial_rejected(self, world):
        _, engine, store = world
        store.add_linkage(self.make_record())
        with pytest.raises(DuplicateLink):
            store.add_linkage(self.make_record(patient_id="hans"))

    def test_no_serial_maps_to_two_patients(self, world):
        _, engine, store = world
        rng = random.Random(1)
        for i in range(50):
            try:
                store.add_linkage(self.make_record(serial=f"S{rng.randrange(20)}",
                                                   patient_id=rng.choice(["erika", "hans"])))
            except DuplicateLink:
                pass
        seen: dict[str, str] = {}
        for serial, record in store.linkages_by_serial.items():
            assert seen.setdefault(serial, record.patient_id) == record.patient_id


class TestExport:
    def seed(self, world):
        clock, engine, store = world
        store.put_object(patient_object(), staff(engine))
        hans = patient_object("hans")
        hans.metadata = {"patient_id": "hans", "name": "Hans Beispiel",
                         "birthdate": "1960-11-02", "address": "Beispielallee 9, Chemnitz"}
        store.put_object(hans, staff(engine))
        surgery = DigitalObject(
            object_id="surgery-1", kind="surgery",
            metadata={"patient_id": "erika"},
            sections={Section.MEDICAL: {"surgeries": [
                {"procedure": "THA", "author": "dr-gruber", "patient": "erika"}
            ]}},
        )
        store.put_object(surgery, staff(engine))
        return store

    def test_no_direct_identifiers_in_export(self, world):
        _, engine, store = world
        self.seed(world)
        dataset = store.export_anonymized({}, "pseudo-key", staff(engine))
        blob = json.dumps(dataset)
        for identity in engine.directory.identity_strings():
            assert identity not in blob, f"leaked identity {identity!r}"

    def test_pseudonyms_stable_per_key(self, world):
        _, engine, store = world
        self.seed(world)
        first = store.export_anonymized({"kind": "patient"}, "key-A", staff(engine))
        second = store.export_anonymized({"kind": "patient"}, "key-A", staff(engine))
        other = store.export_anonymized({"kind": "patient"}, "key-B", staff(engine))
        assert [r["pseudonym"] for r in first] == [r["pseudonym"] for r in second]
        assert set(r["pseudonym"] for r in first).isdisjoint(r["pseudonym"] for r in other)

    def test_age_bucketed(self, world):
        clock, engine, store = world
        self.seed(world)
        dataset = store.export_anonymized({"kind": "patient"}, "k", staff(engine))
        by_pseudo = {r["age_bucket"] for r in dataset}
        # clock is 2020-09-13; born 1975 -> 45, born 1960 -> 59
        assert by_pseudo == {"45-49", "55-59"}

    def test_export_requires_capability(self, world):
        _, engine, store = world
        self.seed(world)
        with pytest.raises(AccessDenied):
            store.export_anonymized({}, "k", patient(engine))

    def test_export_audited_once_per_call(self, world):
        _, engine, store = world
        self.seed(world)
        before = len(engine.audit.entries)
        store.export_anonymized({}, "k", staff(engine))
        exports = [e for e in engine.audit.entries[before:] if e.action == "export"]
        assert len(exports) == 1

    def test_surgery_patient_reference_pseudonymized(self, world):
        _, engine, store = world
        self.seed(world)
        dataset = store.export_anonymized({"kind": "surgery"}, "k", staff(engine))
        entry = dataset[0]["sections"]["medical_focus"]["surgeries"][0]
        assert "author" not in entry
        assert entry["patient"] != "erika" and len(entry["patient"]) == 32
