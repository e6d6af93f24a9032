package com.example.calc;

import static org.junit.jupiter.api.Assertions.*;

import org.junit.jupiter.api.BeforeEach;
import org.junit.jupiter.api.Test;

class CalculatorTest {

    private Calculator calculator;

    @BeforeEach
    void setUp() {
        calculator = new Calculator();
    }

    @Test
    void testAdd() {
        int a = 2, b = 3;
        int sum = calculator.add(a, b);
        int doubled = calculator.add(sum, sum);
        assertEquals(5, sum);
        assertEquals(10, doubled);
    }

    @Test
    void subtractsNegative() {
        int result = calculator.subtract(1, -1);
        assertEquals(2, result, "1 - (-1)");
    }

    @Test
    void testDivideByZero() {
        ArithmeticException ex = assertThrows(ArithmeticException.class, () -> calculator.divide(1, 0));
        assertEquals("/ by zero", ex.getMessage());
    }

    private int helper(int x) {
        return x * 2;
    }
}
