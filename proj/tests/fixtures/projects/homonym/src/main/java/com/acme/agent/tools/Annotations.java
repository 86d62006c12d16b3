package com.acme.agent.tools;

public class Annotations {
    public @interface Schema { }

    public @interface Param { }
}
