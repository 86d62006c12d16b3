package com.ex.xml;

import java.io.IOException;
import javax.xml.namespace.QName;
import javax.xml.stream.XMLStreamException;
import javax.xml.stream.XMLStreamWriter;
import org.codehaus.stax2.XMLStreamWriter2;
import org.codehaus.stax2.ri.Stax2WriterAdapter;

public class ToXmlGenerator {
    protected final XMLStreamWriter2 _xmlWriter;
    protected final IOContext _ioContext;
    protected QName _nextName = null;
    protected int _depth;

    public ToXmlGenerator(IOContext ctxt, int features, XMLStreamWriter sw) {
        _ioContext = ctxt;
        _xmlWriter = Stax2WriterAdapter.wrapIfNecessary(sw);
    }

    public void setNextName(QName name) {
        _nextName = name;
    }

    public void writeStartObject() throws IOException {
        if (_nextName == null) {
            throw new IllegalStateException("No element/attribute name specified");
        }
        try {
            _xmlWriter.writeStartElement(_nextName.getLocalPart());
        } catch (XMLStreamException e) {
            throw new IOException(e);
        }
        _depth++;
    }

    public void writeStartArray() throws IOException {
        if (_nextName == null) {
            throw new IllegalStateException("No element/attribute name specified");
        }
        _depth++;
    }

    public void writeEndObject() throws IOException {
        if (_depth == 0) {
            throw new IllegalStateException("Not in an object");
        }
        _depth--;
        try {
            _xmlWriter.writeEndElement();
        } catch (XMLStreamException e) {
            throw new IOException(e);
        }
    }

    public void flush() throws IOException {
        try {
            _xmlWriter.flush();
        } catch (XMLStreamException e) {
            throw new IOException(e);
        }
    }

    public void close() throws IOException {
        flush();
    }
}
