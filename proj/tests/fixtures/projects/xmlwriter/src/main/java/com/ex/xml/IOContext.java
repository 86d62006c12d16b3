package com.ex.xml;

public class IOContext {
    public IOContext(Object source, boolean managed) {}
}
