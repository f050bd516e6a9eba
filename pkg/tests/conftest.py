from datetime import datetime, timedelta, timezone

import pytest

from prodfreq.eventlog import EventLog, EventRecord

T0 = datetime(2020, 1, 1, tzinfo=timezone.utc)


def at(hours: float) -> datetime:
    return T0 + timedelta(hours=hours)


def rec(case, activity, hours, resource="r1", lifecycle="complete"):
    return EventRecord(case, activity, at(hours), resource, lifecycle)


@pytest.fixture
def three_path_spec():
    return {
        "seed": 11,
        "case_count": 100,
        "paths": [
            {"name": "A", "activities": ["SUB", "PRE", "CAN"], "weight": 40},
            {"name": "B", "activities": ["SUB", "PRE", "ACC", "REG"], "weight": 35},
            {"name": "C", "activities": ["SUB", "DEC"], "weight": 25},
        ],
    }


@pytest.fixture
def abc_log():
    return EventLog([rec("c1", "A", 0.0), rec("c1", "B", 1.0), rec("c1", "C", 2.0)])
