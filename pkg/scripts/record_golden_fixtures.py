"""Write the canned LLM responses used by the golden matrix example run.

Each response is stored as ``<request-hash>.txt`` so the offline mock serves
it for exactly that prompt. Re-run after changing a prompt template; the
hash-stability test fails until you do.

    python scripts/record_golden_fixtures.py [--out tests/fixtures/golden]
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from testrefine.java_ast import extract_test_methods, parse_source
from testrefine.llm_gateway import COMMENT_TEMPLATE, IDENTIFIER_TEMPLATE, LlmGateway, MockProvider
from testrefine.purify import purify

ROOT = Path(__file__).resolve().parents[1]
SOURCE = ROOT / "tests" / "fixtures" / "matrix" / "RealMatrixImplTest.java"

COMMENTS = {
    "testGetColumnMatrix_1": """\
/**
 * Verifies that the column matrix at a valid index matches the expected column.
 */
public void testRetrieveColumnAsSubMatrix() {
    // Arrange: Create a RealMatrix instance using subTestData
    RealMatrix matrixUnderTest = new RealMatrixImpl(subTestData);
    // Create a RealMatrix instance representing the expected column matrix for column 3
    RealMatrix expectedColumnMatrix = new RealMatrixImpl(subColumn3);
    // Act: Retrieve the column matrix at index 3
    RealMatrix retrievedColumnMatrix=matrixUnderTest
                    .getColumnMatrix(3);
    // Assert
    // Verify that the retrieved column matrix matches the expected column matrix
    assertEquals(expectedColumnMatrix, retrievedColumnMatrix);
}
""",
    "testGetColumnMatrix_2": """\
/**
 * Verifies that an out-of-range column index raises MatrixIndexException.
 */
public void
testGetColumnMatrixWithInvalidIndicesThrowsException()
{
    // Arrange
    RealMatrix matrixInstance = new RealMatrixImpl(subTestData);
    // Act and Assert
    // Get a column matrix with an index out of bounds
    assertThrows(MatrixIndexException.class,
        () -> matrixInstance.getColumnMatrix(5));
}
""",
}

IDENTIFIERS = {
    "testGetColumnMatrix_1": """\
testGetColumnMatrix_1 -> testRetrieveColumnAsSubMatrix
m -> matrixUnderTest
mColumn3 -> expectedColumnMatrix
""",
    "testGetColumnMatrix_2": """\
testGetColumnMatrix_2 -> testGetColumnMatrixWithInvalidIndicesThrowsException
m -> matrixInstance
""",
}


def requests_for_matrix_example():
    """(purified name, task, request) for every prompt the golden run issues."""
    tree = parse_source(SOURCE.read_text(encoding="utf-8"))
    (method,) = extract_test_methods(tree)
    gateway = LlmGateway(MockProvider())
    out = []
    for p in purify(method):
        src = p.render()
        out.append((p.name, "comments", gateway.request("comments", COMMENT_TEMPLATE, src, method.class_name)))
        out.append((p.name, "identifiers",
                    gateway.request("identifiers", IDENTIFIER_TEMPLATE, src, method.class_name)))
    return out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=ROOT / "tests" / "fixtures" / "golden")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for stale in args.out.glob("*.txt"):
        stale.unlink()
    index = {}
    for name, task, request in requests_for_matrix_example():
        text = (COMMENTS if task == "comments" else IDENTIFIERS)[name]
        digest = request.digest()
        (args.out / f"{digest}.txt").write_text(text, encoding="utf-8")
        index[f"{name}:{task}"] = digest
    (args.out / "index.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {len(index)} fixtures to {args.out}")


if __name__ == "__main__":
    main()
