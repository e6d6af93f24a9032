import sys
from pathlib import Path

import pytest

TESTS = Path(__file__).resolve().parent
FIXTURES = TESTS / "fixtures"
sys.path.insert(0, str(TESTS))

MATRIX_TEST = """\
public void testGetColumnMatrix() {
    RealMatrix m = new RealMatrixImpl(subTestData);
    RealMatrix mColumn3 = new RealMatrixImpl(subColumn3);
    assertEquals("Column3", mColumn3, m.getColumnMatrix(3));
    assertThrows(MatrixIndexException.class, () -> m.getColumnMatrix(5));
}
"""

# an LLM rewrite that merges two scenarios, with a call that does not exist
HALLUCINATED = """\
public void testRetrieveColumnMatrixWithValidAndInvalidIndices() {
    //Given: A RealMatrix initialized with subTestData
    RealMatrix matrix = new RealMatrixImpl(subTestData);
    RealMatrix expectedLastColumn = new RealMatrixImpl(subColumn3);
    //When: Retrieving the last column matrix
    //Then: The retrieved last column matrix should match the expected last column matrix
    assertEquals(expectedLastColumn, matrix.getColumnMatrix(matrix.getColumnDimension() - 1));
    //When: Attempting to retrieve a column matrix with an index equal to the column dimension
    //Then: A MatrixIndexException should be thrown
    assertThrows(MatrixIndexException.class,
        () -> matrix.getColumnMatrix(getColumnMatrix(matrix.getColumnDimension())));
}
"""

REFINED_EXAMPLE = """\
/* Omitted for saving space */
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
"""


@pytest.fixture
def matrix_method():
    from testrefine.java_ast import extract_test_methods, parse_source

    (method,) = extract_test_methods(parse_source(MATRIX_TEST))
    return method


@pytest.fixture
def matrix_purified(matrix_method):
    from testrefine.purify import purify

    return purify(matrix_method)


@pytest.fixture
def golden_dir():
    return FIXTURES / "golden"


@pytest.fixture
def matrix_dir():
    return FIXTURES / "matrix"
