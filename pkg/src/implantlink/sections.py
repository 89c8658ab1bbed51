"""The three data domains and their closed field schemas.

Every payload field of a digital object belongs to exactly one section;
harmonization rejects anything outside these lists.
"""

from __future__ import annotations

from enum import Enum


class Section(str, Enum):
    SOCIAL = "social_focus"
    MEDICAL = "medical_focus"
    TECHNICAL = "technical_focus"


SECTION_SCHEMAS: dict[Section, frozenset[str]] = {
    # manufacturing provenance: master data, materials, process, testing,
    # interface geometry, and the revision tooling surgeons need later
    Section.TECHNICAL: frozenset(
        {
            "udi",
            "device_master",
            "material_lot",
            "process_parameters_static",
            "process_parameters_dynamic",
            "post_treatment",
            "ndt_results",
            "surface_roughness_um",
            "revision_instruments",
            "compatible_components",
        }
    ),
    # clinical record: every entry carries its author
    Section.MEDICAL: frozenset(
        {
            "surgeries",
            "imaging_references",
            "follow_ups",
            "rehabilitation_measures",
        }
    ),
    # lifestyle and vitals, fed by wearables and patient entry
    Section.SOCIAL: frozenset(
        {
            "heart_rate_series",
            "spo2_series",
            "blood_pressure_series",
            "activity_steps",
            "sleep_log",
            "nutrition_log",
            "weight_kg",
        }
    ),
}

# The patient-writable area of the social section. All current social fields
# are patient-generated; deployments can narrow this set via engine config.
PATIENT_ENTRY_FIELDS: frozenset[str] = SECTION_SCHEMAS[Section.SOCIAL]

# A producer feed must deliver at least these before the implant clears the
# procurement gate (master data, revision tooling, and the process summary).
PROCUREMENT_REQUIRED_FIELDS: tuple[str, ...] = (
    "device_master",
    "revision_instruments",
    "process_parameters_static",
)

VITAL_SERIES_FIELDS: dict[str, str] = {
    "heart_rate": "heart_rate_series",
    "spo2": "spo2_series",
    "systolic_bp": "blood_pressure_series",
    "diastolic_bp": "blood_pressure_series",
}


def section_of_field(field: str) -> Section:
    for section, fields in SECTION_SCHEMAS.items():
        if field in fields:
            return section
    raise KeyError(f"{field!r} is not a canonical field of any section")
