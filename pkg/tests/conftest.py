import numpy as np
import pytest

from edusynth.dataset import student_schema

HEADER = "gender,race_ethnicity,parental_education,lunch,test_prep,math,reading,writing,science,total_score"
EXAMPLE_ROWS = [
    "Male,B,High School,1,0,65,100,67,96,328",
    "Male,C,Master's,0,0,10,99,97,58,264",
    "Male,D,Some College,1,1,22,51,41,84,198",
    "Female,A,Associate's,0,0,87,66,76,61,290",
    "Female,C,Associate's,1,0,62,36,79,63,240",
]


def write_rows(path, rows, header=HEADER):
    path.write_text("\n".join([header, *rows]) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def schema():
    return student_schema()


@pytest.fixture
def example_csv(tmp_path):
    return write_rows(tmp_path / "example.csv", EXAMPLE_ROWS)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria register (id -> (status, detail)) and print a summary line each
ACCEPTANCE: dict[str, tuple[str, str]] = {}


def record(criterion: str, passed, detail: str = "") -> bool:
    status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
    ACCEPTANCE[criterion] = (status, detail)
    return bool(passed)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0].lstrip("C"))):
        status, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{status:4}  {key}: {detail}")
