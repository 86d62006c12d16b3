package org.codehaus.stax2;

import javax.xml.stream.XMLStreamWriter;

public interface XMLStreamWriter2 extends XMLStreamWriter {
    void writeRaw(String text);
}
