package com.ex.xml;

import org.junit.jupiter.api.Test;

class ToXmlGeneratorMocklessTest {
    @Test
    void spins() {
        int n = 0;
        while (true) {
            n++;
        }
    }

    @Test
    void quick() {
        int n = 1;
    }
}
