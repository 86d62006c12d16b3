#!/usr/bin/env python3
"""Stand-in for javac + JUnit + JaCoCo on small fixture projects.

Understands a Java subset (locals, fields, calls, new, if/while/for(;;)/try,
throw, return, asserts, assertThrows with lambdas). Emits javac-style
diagnostics, Surefire XML and JaCoCo XML so the validator and metrics code
see the same formats as with a real toolchain.

  fakejava.py compile  --project P --test FILE
  fakejava.py run      --project P --test FILE --reports DIR [--method M]
  fakejava.py coverage --project P --test FILE --out XML
"""

import argparse
import os
import re
import sys
import time
from xml.sax.saxutils import escape, quoteattr

HERE = os.path.dirname(os.path.abspath(__file__))
JDK_TABLE = os.path.normpath(os.path.join(HERE, "..", "..", "..", "data", "jdk_table.tsv"))

# ---------------------------------------------------------------------------------- lexer

TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<lcomment>//[^\n]*)
  | (?P<bcomment>/\*.*?\*/)
  | (?P<str>"(?:\\.|[^"\\\n])*")
  | (?P<chr>'(?:\\.|[^'\\\n])')
  | (?P<num>\d+[lL]?)
  | (?P<id>[A-Za-z_$][\w$]*)
  | (?P<op>->|::|\+\+|--|==|!=|<=|>=|&&|\|\||\+=|-=|\.\.\.|[{}()\[\];,.=<>!+\-*/%?:@&|^~])
""", re.VERBOSE | re.DOTALL)


class Tok:
    __slots__ = ("kind", "text", "line")

    def __init__(self, kind, text, line):
        self.kind, self.text, self.line = kind, text, line

    def __repr__(self):
        return f"{self.text}@{self.line}"


class CompileError(Exception):
    def __init__(self, line, message, symbol=None, location=None):
        super().__init__(message)
        self.line, self.message, self.symbol, self.location = line, message, symbol, location


def tokenize(src):
    toks, pos, line = [], 0, 1
    while pos < len(src):
        m = TOKEN_RE.match(src, pos)
        if not m:
            raise CompileError(line, "illegal character: '%s'" % src[pos])
        kind = m.lastgroup
        text = m.group(kind)
        if kind not in ("ws", "lcomment", "bcomment"):
            toks.append(Tok(kind, text, line))
        line += text.count("\n")
        pos = m.end()
    toks.append(Tok("eof", "", line))
    return toks

# ---------------------------------------------------------------------------------- AST

class Node:
    def __init__(self, kind, line, **kw):
        self.kind, self.line = kind, line
        self.__dict__.update(kw)


class Method:
    def __init__(self, name, params, body, line, static=False, annotations=(), ret="void", ctor=False, abstract=False):
        self.name, self.params, self.body, self.line = name, params, body, line
        self.static, self.annotations, self.ret, self.ctor, self.abstract = static, list(annotations), ret, ctor, abstract


class ClassDecl:
    def __init__(self):
        self.package = ""
        self.name = ""
        self.kind = "class"
        self.abstract = False
        self.extends = None
        self.implements = []
        self.fields = []      # (name, type, init, static, line)
        self.methods = []
        self.ctors = []
        self.imports = []
        self.static_imports = []
        self.file = ""
        self.lines = set()    # executable lines
        self.branch_lines = set()

    @property
    def fqn(self):
        return self.package + "." + self.name if self.package else self.name


class Parser:
    def __init__(self, toks, cls=None):
        self.t, self.i, self.cls = toks, 0, cls

    def peek(self, k=0):
        return self.t[min(self.i + k, len(self.t) - 1)]

    def at(self, text, k=0):
        return self.peek(k).text == text and self.peek(k).kind in ("op", "id")

    def next(self):
        tok = self.t[self.i]
        self.i = min(self.i + 1, len(self.t) - 1)
        return tok

    def expect(self, text):
        if not self.at(text):
            prev = self.t[self.i - 1] if self.i > 0 else self.peek()
            line = prev.line if text == ";" else self.peek().line
            raise CompileError(line, "'%s' expected" % text)
        return self.next()

    def ident(self):
        tok = self.peek()
        if tok.kind != "id":
            raise CompileError(tok.line, "<identifier> expected")
        return self.next().text

    def mark(self, line, branch=False):
        if self.cls is not None:
            self.cls.lines.add(line)
            if branch:
                self.cls.branch_lines.add(line)

    # -- compilation unit
    def unit(self):
        c = ClassDecl()
        self.cls = c
        if self.at("package"):
            self.next()
            c.package = self.qualified()
            self.expect(";")
        while self.at("import"):
            self.next()
            static = False
            if self.at("static"):
                self.next()
                static = True
            line = self.peek().line
            name = self.qualified(allow_star=True)
            self.expect(";")
            (c.static_imports if static else c.imports).append((name, line))
        while not self.at("class") and not self.at("interface") and self.peek().kind != "eof":
            tok = self.next()
            if tok.text == "abstract":
                c.abstract = True
            if tok.text == "@":
                self.annotation_rest()
        if self.peek().kind == "eof":
            raise CompileError(self.peek().line, "class, interface, enum, or record expected")
        c.kind = self.next().text
        c.name = self.ident()
        if self.at("<"):
            self.skip_angles()
        if self.at("extends"):
            self.next()
            c.extends = self.type_name()
            while self.at(","):
                self.next()
                c.implements.append(self.type_name())
        if self.at("implements"):
            self.next()
            c.implements.append(self.type_name())
            while self.at(","):
                self.next()
                c.implements.append(self.type_name())
        self.expect("{")
        while not self.at("}"):
            if self.peek().kind == "eof":
                raise CompileError(self.peek().line, "reached end of file while parsing")
            self.member(c)
        self.next()
        return c

    def qualified(self, allow_star=False):
        parts = [self.ident()]
        while self.at("."):
            self.next()
            if allow_star and self.at("*"):
                self.next()
                parts.append("*")
                break
            parts.append(self.ident())
        return ".".join(parts)

    def skip_angles(self):
        depth = 0
        while True:
            tok = self.next()
            if tok.text == "<":
                depth += 1
            elif tok.text == ">":
                depth -= 1
                if depth == 0:
                    return
            elif tok.kind == "eof":
                raise CompileError(tok.line, "'>' expected")

    def type_name(self):
        name = self.qualified()
        if self.at("<"):
            self.skip_angles()
        while self.at("[") and self.at("]", 1):
            self.next()
            self.next()
            name += "[]"
        if self.at("..."):
            self.next()
            name += "[]"
        return name

    def annotation_rest(self):
        name = self.qualified()
        args = None
        if self.at("("):
            start = self.i
            depth = 0
            while True:
                tok = self.next()
                if tok.text == "(":
                    depth += 1
                elif tok.text == ")":
                    depth -= 1
                    if depth == 0:
                        break
                elif tok.kind == "eof":
                    raise CompileError(tok.line, "')' expected")
            args = [t.text for t in self.t[start:self.i]]
        return name, args

    def modifiers(self):
        mods, annos = set(), []
        while True:
            if self.at("@") and not self.at("interface", 1):
                self.next()
                annos.append(self.annotation_rest())
            elif self.peek().text in ("public", "private", "protected", "static", "final", "abstract",
                                      "synchronized", "native", "transient", "volatile", "default", "strictfp"):
                mods.add(self.next().text)
            else:
                return mods, annos

    def member(self, c):
        mods, annos = self.modifiers()
        line = self.peek().line
        if self.at("<"):
            self.skip_angles()
        if self.peek().text == c.name and self.at("(", 1):
            self.next()
            params = self.params()
            self.throws()
            body = self.block()
            c.ctors.append(Method("<init>", params, body, line, annotations=annos, ctor=True))
            return
        if self.at("class") or self.at("interface"):
            raise CompileError(line, "nested types are not supported by this toolchain")
        rtype = "void" if self.at("void") else None
        if rtype:
            self.next()
        else:
            rtype = self.type_name()
        name = self.ident()
        if self.at("("):
            params = self.params()
            self.throws()
            abstract = "abstract" in mods or (c.kind == "interface" and "static" not in mods and "default" not in mods)
            if self.at(";"):
                self.next()
                body = None
                abstract = True
            else:
                body = self.block()
            c.methods.append(Method(name, params, body, line, static="static" in mods, annotations=annos,
                                    ret=rtype, abstract=abstract))
            return
        while True:
            init = None
            if self.at("="):
                self.next()
                init = self.expr()
                self.mark(line)
            c.fields.append((name, rtype, init, "static" in mods, line))
            if self.at(","):
                self.next()
                name = self.ident()
                continue
            break
        self.expect(";")

    def params(self):
        self.expect("(")
        out = []
        while not self.at(")"):
            self.modifiers()
            ptype = self.type_name()
            out.append((ptype, self.ident()))
            if self.at(","):
                self.next()
            elif not self.at(")"):
                raise CompileError(self.peek().line, "',', ')', or '[' expected")
        self.next()
        return out

    def throws(self):
        if self.at("throws"):
            self.next()
            self.type_name()
            while self.at(","):
                self.next()
                self.type_name()

    # -- statements
    def block(self):
        line = self.expect("{").line
        stmts = []
        while not self.at("}"):
            if self.peek().kind == "eof":
                raise CompileError(self.peek().line, "reached end of file while parsing")
            stmts.append(self.statement())
        self.next()
        return Node("block", line, stmts=stmts)

    def looks_like_decl(self):
        save = self.i
        try:
            while self.at("final"):
                self.next()
            if self.peek().kind != "id" or self.peek().text in ("return", "throw", "new", "this", "super", "if",
                                                                 "while", "for", "try", "true", "false", "null"):
                return False
            self.type_name()
            if self.peek().kind != "id":
                return False
            self.next()
            return self.at("=") or self.at(";") or self.at(",")
        except CompileError:
            return False
        finally:
            self.i = save

    def statement(self):
        tok = self.peek()
        line = tok.line
        if self.at("{"):
            return self.block()
        if self.at(";"):
            self.next()
            return Node("empty", line)
        if self.at("if"):
            self.next()
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            self.mark(line, branch=True)
            then = self.statement()
            other = None
            if self.at("else"):
                self.next()
                other = self.statement()
            return Node("if", line, cond=cond, then=then, other=other)
        if self.at("while"):
            self.next()
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            self.mark(line, branch=True)
            return Node("while", line, cond=cond, body=self.statement())
        if self.at("for"):
            self.next()
            self.expect("(")
            init = None if self.at(";") else self.statement_inner()
            if init is None:
                self.expect(";")
            cond = None if self.at(";") else self.expr()
            self.expect(";")
            update = None if self.at(")") else self.expr()
            self.expect(")")
            self.mark(line, branch=cond is not None)
            return Node("for", line, init=init, cond=cond, update=update, body=self.statement())
        if self.at("try"):
            self.next()
            body = self.block()
            catches, fin = [], None
            while self.at("catch"):
                self.next()
                self.expect("(")
                self.modifiers()
                types = [self.type_name()]
                while self.at("|"):
                    self.next()
                    types.append(self.type_name())
                var = self.ident()
                self.expect(")")
                catches.append((types, var, self.block()))
            if self.at("finally"):
                self.next()
                fin = self.block()
            if not catches and fin is None:
                raise CompileError(line, "'try' without 'catch', 'finally' or resource declarations")
            return Node("try", line, body=body, catches=catches, fin=fin)
        if self.at("return"):
            self.next()
            value = None if self.at(";") else self.expr()
            self.expect(";")
            self.mark(line)
            return Node("return", line, value=value)
        if self.at("throw"):
            self.next()
            value = self.expr()
            self.expect(";")
            self.mark(line)
            return Node("throw", line, value=value)
        if self.at("break"):
            self.next()
            self.expect(";")
            self.mark(line)
            return Node("break", line)
        node = self.statement_inner()
        self.expect(";")
        return node

    def statement_inner(self):
        line = self.peek().line
        self.mark(line)
        if self.looks_like_decl():
            while self.at("final"):
                self.next()
            vtype = self.type_name()
            decls = []
            while True:
                name = self.ident()
                init = None
                if self.at("="):
                    self.next()
                    init = self.expr()
                decls.append((name, init))
                if not self.at(","):
                    break
                self.next()
            return Node("local", line, vtype=vtype, decls=decls)
        return Node("expr", line, expr=self.expr())

    # -- expressions
    def expr(self):
        left = self.ternary()
        if self.at("=") or self.at("+=") or self.at("-="):
            op = self.next().text
            right = self.expr()
            if left.kind not in ("name", "field"):
                raise CompileError(left.line, "unexpected type")
            return Node("assign", left.line, target=left, op=op, value=right)
        return left

    def ternary(self):
        cond = self.binary(0)
        if self.at("?"):
            self.next()
            a = self.expr()
            self.expect(":")
            b = self.expr()
            return Node("cond", cond.line, cond=cond, a=a, b=b)
        return cond

    LEVELS = [("||",), ("&&",), ("==", "!="), ("<", ">", "<=", ">=", "instanceof"), ("+", "-"), ("*", "/", "%")]

    def binary(self, level):
        if level == len(self.LEVELS):
            return self.unary()
        left = self.binary(level + 1)
        while self.peek().text in self.LEVELS[level] and self.peek().kind in ("op", "id"):
            op = self.next().text
            if op == "instanceof":
                left = Node("instanceof", left.line, value=left, type=self.type_name())
                continue
            right = self.binary(level + 1)
            left = Node("bin", left.line, op=op, a=left, b=right)
        return left

    def unary(self):
        if self.at("!") or self.at("-"):
            tok = self.next()
            return Node("unary", tok.line, op=tok.text, value=self.unary())
        if self.at("++") or self.at("--"):
            tok = self.next()
            target = self.unary()
            return Node("incdec", tok.line, op=tok.text, target=target)
        if self.at("(") and self.peek(1).kind == "id" and self.at(")", 2) and \
                self.peek(3).kind in ("id", "str", "num") and self.peek(1).text[:1].isupper():
            self.next()
            ctype = self.next().text
            self.next()
            return Node("cast", self.peek().line, type=ctype, value=self.unary())
        return self.postfix(self.primary())

    def args(self):
        self.expect("(")
        out = []
        while not self.at(")"):
            out.append(self.expr())
            if self.at(","):
                self.next()
            elif not self.at(")"):
                raise CompileError(self.peek().line, "')' expected")
        self.next()
        return out

    def postfix(self, node):
        while True:
            if self.at("."):
                self.next()
                if self.at("class"):
                    self.next()
                    node = Node("classlit", node.line, type=node)
                    continue
                name_tok = self.peek()
                name = self.ident()
                if self.at("("):
                    node = Node("call", name_tok.line, target=node, name=name, args=self.args())
                else:
                    node = Node("field", name_tok.line, target=node, name=name)
            elif self.at("++") or self.at("--"):
                tok = self.next()
                node = Node("incdec", tok.line, op=tok.text, target=node, post=True)
            else:
                return node

    def primary(self):
        tok = self.peek()
        line = tok.line
        if tok.kind == "num":
            self.next()
            return Node("lit", line, value=int(tok.text.rstrip("lL")))
        if tok.kind == "str":
            self.next()
            return Node("lit", line, value=bytes(tok.text[1:-1], "utf-8").decode("unicode_escape"))
        if tok.kind == "chr":
            self.next()
            return Node("lit", line, value=tok.text[1:-1])
        if self.at("true") or self.at("false"):
            self.next()
            return Node("lit", line, value=tok.text == "true")
        if self.at("null"):
            self.next()
            return Node("lit", line, value=None)
        if self.at("("):
            if self.is_lambda():
                return self.lambda_expr()
            self.next()
            inner = self.expr()
            self.expect(")")
            return inner
        if self.at("new"):
            self.next()
            ctype = self.type_name()
            if self.at("["):
                self.next()
                size = self.expr()
                self.expect("]")
                return Node("newarray", line, type=ctype, size=size)
            args = self.args()
            body = None
            if self.at("{"):
                body = self.anonymous_body()
            return Node("new", line, type=ctype, args=args, body=body)
        if self.at("this"):
            self.next()
            if self.at("("):
                return Node("ctorcall", line, args=self.args(), sup=False)
            return Node("this", line)
        if self.at("super"):
            self.next()
            if self.at("("):
                return Node("ctorcall", line, args=self.args(), sup=True)
            return Node("this", line)
        if tok.kind == "id":
            if self.at("->", 1):
                return self.lambda_expr()
            self.next()
            if self.at("("):
                return Node("call", line, target=None, name=tok.text, args=self.args())
            return Node("name", line, name=tok.text)
        raise CompileError(line, "illegal start of expression")

    def is_lambda(self):
        j = self.i + 1
        depth = 1
        while depth and self.t[j].kind != "eof":
            if self.t[j].text == "(":
                depth += 1
            elif self.t[j].text == ")":
                depth -= 1
            j += 1
        return self.t[j].text == "->"

    def lambda_expr(self):
        line = self.peek().line
        if self.at("("):
            while not self.at(")"):
                self.next()
            self.next()
        else:
            self.next()
        self.expect("->")
        if self.at("{"):
            return Node("lambda", line, body=self.block(), value=None)
        return Node("lambda", line, body=None, value=self.expr())

    def anonymous_body(self):
        line = self.expect("{").line
        depth, count = 1, 0
        while depth:
            tok = self.next()
            if tok.kind == "eof":
                raise CompileError(tok.line, "reached end of file while parsing")
            if tok.text == "{":
                depth += 1
            elif tok.text == "}":
                depth -= 1
            count += 1
        return Node("anon", line, empty=count == 1)

# ---------------------------------------------------------------------------------- world

def load_jdk():
    table = {}
    if not os.path.exists(JDK_TABLE):
        return table
    with open(JDK_TABLE) as f:
        for line in f:
            if not line.strip() or line.startswith("#"):
                continue
            fqn, _, items = line.rstrip("\n").partition("\t")
            info = {"methods": {}, "supers": [], "abstract": False, "static": {}}
            for item in items.split(";"):
                item = item.strip()
                if item in ("@interface", "@abstract"):
                    info["abstract"] = True
                elif item.startswith("@extends ") or item.startswith("@implements "):
                    info["supers"] += item.split(" ", 1)[1].split(",")
                elif item.startswith("<init>") or item.startswith("field ") or item.startswith("@"):
                    continue
                elif "(" in item:
                    words = item.split("(")[0].split()
                    name = words[-1]
                    params = item.split("(", 1)[1].split(")")[0]
                    arity = 0 if not params else params.count(",") + 1
                    ret = item.rsplit(":", 1)[1] if "):" in item else "void"
                    info["methods"].setdefault(name, []).append((arity, ret))
            table[fqn] = info
    return table


class World:
    def __init__(self, project):
        self.project = project
        self.classes = {}
        self.jdk = load_jdk()
        main = os.path.join(project, "src", "main", "java")
        for root, _, files in os.walk(main):
            for name in sorted(files):
                if name.endswith(".java"):
                    path = os.path.join(root, name)
                    with open(path) as f:
                        src = f.read()
                    c = Parser(tokenize(src)).unit()
                    c.file = path
                    self.classes[c.fqn] = c

    def known(self, fqn):
        return fqn in self.classes or fqn in self.jdk

    def resolve(self, name, c):
        """Type name as written in class c -> FQN, or None."""
        name = name.replace("[]", "")
        if name in ("int", "long", "boolean", "double", "float", "char", "byte", "short", "void", "var"):
            return name
        if "." in name and self.known(name):
            return name
        for imp, _ in c.imports:
            if imp.endswith("." + name):
                return imp
        if c.package and self.known(c.package + "." + name):
            return c.package + "." + name
        if not c.package and name in self.classes:
            return name
        if self.known("java.lang." + name):
            return "java.lang." + name
        for imp, _ in c.imports:
            if imp.endswith(".*") and self.known(imp[:-1] + name):
                return imp[:-1] + name
        if name in ("Exception", "RuntimeException", "Throwable", "Error", "AssertionError", "Object"):
            return "java.lang." + name
        return None

    def supers(self, fqn):
        if fqn in self.classes:
            c = self.classes[fqn]
            return [self.resolve(s, c) or s for s in ([c.extends] if c.extends else []) + c.implements]
        if fqn in self.jdk:
            return self.jdk[fqn]["supers"]
        return []

    def has_method(self, fqn, name, arity, seen=None):
        """True / False, or None when some supertype is unknown."""
        seen = seen or set()
        if fqn in seen:
            return False
        seen.add(fqn)
        if fqn in self.classes:
            if any(m.name == name and len(m.params) == arity for m in self.classes[fqn].methods):
                return True
        elif fqn in self.jdk:
            if any(a == arity for a, _ in self.jdk[fqn]["methods"].get(name, [])):
                return True
        else:
            return None
        unknown = False
        for s in self.supers(fqn):
            r = self.has_method(s, name, arity, seen)
            if r:
                return True
            if r is None:
                unknown = True
        if fqn != "java.lang.Object" and name in ("toString", "equals", "hashCode", "getClass"):
            return True
        return None if unknown else False

    def find_method(self, fqn, name, arity, static=None):
        seen = set()
        todo = [fqn]
        while todo:
            cur = todo.pop(0)
            if cur in seen or cur not in self.classes:
                continue
            seen.add(cur)
            for m in self.classes[cur].methods:
                if m.name == name and len(m.params) == arity and (static is None or m.static == static):
                    return self.classes[cur], m
            todo += self.supers(cur)
        return None, None

    def jdk_return(self, fqn, name):
        seen, todo = set(), [fqn]
        while todo:
            cur = todo.pop(0)
            if cur in seen or cur not in self.jdk:
                continue
            seen.add(cur)
            for _, ret in self.jdk[cur]["methods"].get(name, []):
                return ret
            todo += self.jdk[cur]["supers"]
        return None

    def is_subtype(self, sub, sup):
        seen, todo = set(), [sub]
        while todo:
            cur = todo.pop(0)
            if cur == sup:
                return True
            if cur in seen:
                continue
            seen.add(cur)
            todo += self.supers(cur)
            if cur not in ("java.lang.Object",):
                todo.append("java.lang.Object") if not self.supers(cur) else None
        return sup in ("java.lang.Object", "java.lang.Throwable") and sub.endswith(("Exception", "Error"))

# ---------------------------------------------------------------------------------- checks

TRUSTED = ("org.junit.", "junit.framework.", "org.hamcrest.", "org.opentest4j.")
ASSERTS = {"assertEquals", "assertNotEquals", "assertTrue", "assertFalse", "assertNull", "assertNotNull",
           "assertSame", "assertNotSame", "assertThrows", "fail", "assertArrayEquals", "assertDoesNotThrow"}


class Checker:
    """Symbol checks on the test class, reported like javac."""

    def __init__(self, world, cls):
        self.w, self.c, self.errors = world, cls, []

    def err(self, line, msg, symbol=None, location=None):
        self.errors.append(CompileError(line, msg, symbol, location))

    def check(self):
        c = self.c
        for imp, line in c.imports:
            if imp.endswith(".*") or imp.startswith(TRUSTED):
                continue
            if not self.w.known(imp):
                pkg = imp.rsplit(".", 1)[0]
                pkg_known = any(k.startswith(pkg + ".") for k in list(self.w.classes) + list(self.w.jdk))
                if pkg_known:
                    self.err(line, "cannot find symbol", "class " + imp.rsplit(".", 1)[1], "package " + pkg)
                else:
                    self.err(line, "package %s does not exist" % pkg)
        fields = {f[0]: self.type_of(f[1], f[4]) for f in c.fields}
        for m in c.methods + c.ctors:
            scope = dict(fields)
            for ptype, pname in m.params:
                scope[pname] = self.type_of(ptype, m.line)
            if m.body:
                self.stmt(m.body, scope)
        return self.errors

    def type_of(self, written, line):
        if written.split("<")[0] in ("int", "long", "boolean", "double", "float", "char", "byte", "short", "var"):
            return written
        fqn = self.w.resolve(written, self.c)
        if fqn is None and not written.startswith(TRUSTED):
            self.err(line, "cannot find symbol", "class " + written, "class " + self.c.name)
        return fqn

    def stmt(self, n, scope):
        k = n.kind
        if k == "block":
            inner = dict(scope)
            for s in n.stmts:
                self.stmt(s, inner)
        elif k == "local":
            t = self.type_of(n.vtype, n.line)
            for name, init in n.decls:
                if init is not None:
                    self.expr(init, scope)
                scope[name] = t
        elif k == "expr":
            self.expr(n.expr, scope)
        elif k == "if":
            self.expr(n.cond, scope)
            self.stmt(n.then, scope)
            if n.other:
                self.stmt(n.other, scope)
        elif k == "while":
            self.expr(n.cond, scope)
            self.stmt(n.body, scope)
        elif k == "for":
            inner = dict(scope)
            if n.init:
                self.stmt(n.init, inner)
            if n.cond:
                self.expr(n.cond, inner)
            if n.update:
                self.expr(n.update, inner)
            self.stmt(n.body, inner)
        elif k == "try":
            self.stmt(n.body, scope)
            for types, var, body in n.catches:
                inner = dict(scope)
                inner[var] = self.type_of(types[0], body.line)
                self.stmt(body, inner)
            if n.fin:
                self.stmt(n.fin, scope)
        elif k in ("return", "throw") and n.value is not None:
            self.expr(n.value, scope)

    def static_target(self, node, scope):
        """FQN when `node` names a type rather than a value."""
        if node.kind == "name" and node.name not in scope:
            return self.w.resolve(node.name, self.c)
        if node.kind == "field":
            parts = []
            cur = node
            while cur.kind == "field":
                parts.append(cur.name)
                cur = cur.target
            if cur.kind == "name" and cur.name not in scope:
                parts.append(cur.name)
                dotted = ".".join(reversed(parts))
                if self.w.known(dotted):
                    return dotted
        return None

    def expr(self, n, scope):
        k = n.kind
        if k == "name":
            if n.name not in scope and self.w.resolve(n.name, self.c) is None:
                self.err(n.line, "cannot find symbol", "variable " + n.name, "class " + self.c.name)
            return scope.get(n.name)
        if k == "lit":
            return "java.lang.String" if isinstance(n.value, str) else None
        if k == "new":
            for a in n.args:
                self.expr(a, scope)
            fqn = self.type_of(n.type, n.line)
            if fqn in self.w.classes:
                cd = self.w.classes[fqn]
                if (cd.abstract or cd.kind == "interface") and n.body is None:
                    self.err(n.line, "%s is abstract; cannot be instantiated" % cd.name)
                elif n.body is not None and n.body.empty and any(m.abstract for m in cd.methods):
                    first = next(m for m in cd.methods if m.abstract)
                    self.err(n.line, "<anonymous %s$1> is not abstract and does not override abstract method %s() in %s"
                             % (self.c.fqn, first.name, cd.name))
                elif n.body is None and cd.ctors and not any(len(m.params) == len(n.args) for m in cd.ctors):
                    self.err(n.line, "constructor %s in class %s cannot be applied to given types;" % (cd.name, cd.name))
            elif fqn in self.w.jdk and self.w.jdk[fqn]["abstract"] and n.body is None:
                self.err(n.line, "%s is abstract; cannot be instantiated" % fqn.rsplit(".", 1)[1])
            return fqn
        if k == "call":
            for a in n.args:
                if a.kind == "lambda":
                    self.lambda_(a, scope)
                else:
                    self.expr(a, scope)
            if n.target is None:
                if n.name in ASSERTS:
                    return None
                if any(m.name == n.name and len(m.params) == len(n.args) for m in self.c.methods):
                    return None
                self.err(n.line, "cannot find symbol", "method %s(%s)" % (n.name, self.argsig(n)), "class " + self.c.name)
                return None
            owner = self.static_target(n.target, scope)
            where = None
            if owner is None:
                owner = self.expr(n.target, scope)
                if n.target.kind == "name":
                    where = "variable %s of type %s" % (n.target.name, (owner or "?").rsplit(".", 1)[-1])
            else:
                where = "class " + owner.rsplit(".", 1)[-1]
            if owner is None or owner.startswith(TRUSTED):
                return None
            ok = self.w.has_method(owner, n.name, len(n.args))
            if ok is False:
                self.err(n.line, "cannot find symbol", "method %s(%s)" % (n.name, self.argsig(n)), where)
                return None
            if owner in self.w.classes:
                _, m = self.w.find_method(owner, n.name, len(n.args))
                return self.w.resolve(m.ret, self.w.classes[owner]) if m and m.ret != "void" else None
            ret = self.w.jdk_return(owner, n.name)
            return ret if ret and ret != "void" else None
        if k == "field":
            st = self.static_target(n, scope)
            if st:
                return st
            self.expr(n.target, scope)
            return None
        if k in ("bin",):
            self.expr(n.a, scope)
            self.expr(n.b, scope)
            return None
        if k in ("unary", "cast"):
            self.expr(n.value, scope)
            return n.type if k == "cast" else None
        if k == "incdec":
            return self.expr(n.target, scope)
        if k == "assign":
            self.expr(n.value, scope)
            return self.expr(n.target, scope)
        if k == "cond":
            self.expr(n.cond, scope)
            self.expr(n.a, scope)
            return self.expr(n.b, scope)
        if k == "classlit":
            st = self.static_target(n.type, scope)
            if st is None and n.type.kind == "name":
                self.type_of(n.type.name, n.line)
            return None
        if k == "lambda":
            self.lambda_(n, scope)
        if k == "instanceof":
            self.expr(n.value, scope)
        return None

    def lambda_(self, n, scope):
        if n.body is not None:
            self.stmt(n.body, dict(scope))
        else:
            self.expr(n.value, scope)

    def argsig(self, n):
        return ",".join("String" if a.kind == "lit" and isinstance(a.value, str) else
                        "int" if a.kind == "lit" and isinstance(a.value, int) and not isinstance(a.value, bool) else
                        "boolean" if a.kind == "lit" and isinstance(a.value, bool) else
                        "<null>" if a.kind == "lit" else "Object" for a in n.args)

# ---------------------------------------------------------------------------------- runtime

class Obj:
    def __init__(self, fqn):
        self.fqn, self.fields = fqn, {}


class Opaque:
    def __init__(self, fqn):
        self.fqn = fqn or "java.lang.Object"


class JavaThrow(Exception):
    def __init__(self, fqn, message, frames):
        super().__init__(message)
        self.fqn, self.message, self.frames = fqn, message, frames


class Return(Exception):
    def __init__(self, value):
        self.value = value


class Break(Exception):
    pass


class Interp:
    def __init__(self, world, test_cls):
        self.w, self.tc = world, test_cls
        self.stack = []       # (class fqn, method, file name, line)
        self.covered = {}     # file -> set(lines)
        self.branches = {}    # (file, line) -> set(outcomes)
        self.statics = {}

    # -- helpers
    def throw(self, fqn, message):
        raise JavaThrow(fqn, message, list(reversed(self.stack)))

    def here(self, line):
        if self.stack:
            cls, meth, fname, _ = self.stack[-1]
            self.stack[-1] = (cls, meth, fname, line)

    def hit(self, cd, line):
        self.here(line)
        if cd is not None and cd is not self.tc:
            self.covered.setdefault(cd.file, set()).add(line)

    # -- invocation
    def invoke(self, cd, m, this, args):
        env = {"this": this}
        for (ptype, pname), a in zip(m.params, args):
            env[pname] = a
        self.stack.append((cd.fqn, m.name, os.path.basename(cd.file) or cd.name + ".java", m.line))
        try:
            if m.ctor:
                for fname, ftype, init, static, fline in cd.fields:
                    if not static:
                        if init is not None:
                            self.hit(cd, fline)
                        this.fields[fname] = self.eval(init, env, cd) if init is not None else default(ftype)
            if m.body is not None:
                self.exec(m.body, env, cd)
            return None
        except Return as r:
            return r.value
        finally:
            self.stack.pop()

    def construct(self, fqn, args, line):
        if fqn in self.w.classes:
            cd = self.w.classes[fqn]
            obj = Obj(fqn)
            ctor = next((m for m in cd.ctors if len(m.params) == len(args)), None)
            if ctor is None:
                ctor = Method("<init>", [], Node("block", cd.lines and min(cd.lines) or 0, stmts=[]), 0, ctor=True)
            self.invoke(cd, ctor, obj, args)
            return obj
        if fqn and fqn.endswith(("Exception", "Error")):
            o = Opaque(fqn)
            o.message = args[0] if args and isinstance(args[0], str) else None
            return o
        return Opaque(fqn)

    def call(self, target, name, args, cd, line, env):
        if target is None and isinstance(self.current_this(env), Obj):
            this = env.get("this")
            owner, m = self.w.find_method(this.fqn, name, len(args))
            if m:
                return self.invoke(owner, m, this, args)
        if target is None:
            owner, m = (cd, next((mm for mm in cd.methods if mm.name == name and len(mm.params) == len(args)), None))
            if m is not None:
                return self.invoke(owner, m, env.get("this"), args)
            return self.builtin(name, args, line)
        if isinstance(target, StaticRef):
            if target.fqn in self.w.classes:
                owner, m = self.w.find_method(target.fqn, name, len(args))
                if m is None:
                    self.throw("java.lang.NoSuchMethodError", name)
                return self.invoke(owner, m, None, args)
            return Opaque(self.w.jdk_return(target.fqn, name))
        if target is None or target is NULL:
            self.throw("java.lang.NullPointerException",
                       'Cannot invoke "%s()" because value is null' % name)
        if isinstance(target, Obj):
            owner, m = self.w.find_method(target.fqn, name, len(args))
            if m is not None and m.body is not None:
                return self.invoke(owner, m, target, args)
            if name == "toString":
                return target.fqn + "@1"
            if name == "equals":
                return target is args[0]
            return Opaque(None)
        if isinstance(target, str):
            return string_method(target, name, args)
        if isinstance(target, Opaque):
            if name == "getMessage":
                return getattr(target, "message", None)
            if name == "toString":
                return ""
            if name == "getLocalPart" and target.fqn == "javax.xml.namespace.QName":
                return getattr(target, "local", "")
            return Opaque(self.w.jdk_return(target.fqn, name))
        return Opaque(None)

    def current_this(self, env):
        return env.get("this")

    def builtin(self, name, args, line):
        def fail(msg):
            self.throw("java.lang.AssertionError", msg)
        if name == "fail":
            fail(args[0] if args else None)
        if name in ("assertTrue", "assertFalse"):
            cond = args[-1]
            if bool(cond) != (name == "assertTrue"):
                fail(args[0] if len(args) > 1 and isinstance(args[0], str) else None)
            return None
        if name in ("assertNull", "assertNotNull"):
            v = args[-1]
            isnull = v is None or v is NULL
            if isnull != (name == "assertNull"):
                fail("expected %snull" % ("" if name == "assertNull" else "not "))
            return None
        if name in ("assertEquals", "assertSame", "assertNotEquals", "assertNotSame", "assertArrayEquals"):
            a, b = args[-2], args[-1]
            same = a is b or (not isinstance(a, (Obj, Opaque)) and a == b)
            if same != (name in ("assertEquals", "assertSame", "assertArrayEquals")):
                fail("expected:<%s> but was:<%s>" % (show(a), show(b)))
            return None
        self.throw("java.lang.NoSuchMethodError", name)

    # -- statements
    def exec(self, n, env, cd):
        k = n.kind
        if k == "block":
            for s in n.stmts:
                self.exec(s, env, cd)
        elif k == "local":
            self.hit(cd, n.line)
            for name, init in n.decls:
                env[name] = self.eval(init, env, cd) if init is not None else None
        elif k == "expr":
            self.hit(cd, n.line)
            self.eval(n.expr, env, cd)
        elif k == "if":
            self.hit(cd, n.line)
            cond = truthy(self.eval(n.cond, env, cd))
            if cd is not self.tc:
                self.branches.setdefault((cd.file, n.line), set()).add(cond)
            if cond:
                self.exec(n.then, env, cd)
            elif n.other:
                self.exec(n.other, env, cd)
        elif k == "while":
            while True:
                self.hit(cd, n.line)
                cond = truthy(self.eval(n.cond, env, cd))
                if cd is not self.tc:
                    self.branches.setdefault((cd.file, n.line), set()).add(cond)
                if not cond:
                    break
                try:
                    self.exec(n.body, env, cd)
                except Break:
                    break
        elif k == "for":
            if n.init:
                self.exec(n.init, env, cd)
            while True:
                self.hit(cd, n.line)
                if n.cond is not None and not truthy(self.eval(n.cond, env, cd)):
                    break
                try:
                    self.exec(n.body, env, cd)
                except Break:
                    break
                if n.update is not None:
                    self.eval(n.update, env, cd)
        elif k == "try":
            try:
                try:
                    self.exec(n.body, env, cd)
                except JavaThrow as t:
                    for types, var, body in n.catches:
                        if any(self.catches(tp, t.fqn, cd) for tp in types):
                            env[var] = exception_value(t)
                            self.exec(body, env, cd)
                            break
                    else:
                        raise
            finally:
                if n.fin:
                    self.exec(n.fin, env, cd)
        elif k == "return":
            self.hit(cd, n.line)
            raise Return(self.eval(n.value, env, cd) if n.value is not None else None)
        elif k == "throw":
            self.hit(cd, n.line)
            v = self.eval(n.value, env, cd)
            if isinstance(v, Opaque):
                self.throw(v.fqn, getattr(v, "message", None))
            self.throw("java.lang.RuntimeException", None)
        elif k == "break":
            self.hit(cd, n.line)
            raise Break()

    def catches(self, written, thrown, cd):
        fqn = self.w.resolve(written, cd) or written
        if fqn == thrown or fqn in ("java.lang.Throwable", "java.lang.Exception") and not thrown.endswith("Error"):
            return True
        if fqn == "java.lang.Throwable":
            return True
        if fqn == "java.lang.RuntimeException":
            return thrown.startswith("java.lang.") and thrown.endswith("Exception") and thrown not in (
                "java.lang.Exception", "java.io.IOException")
        return self.w.is_subtype(thrown, fqn)

    # -- expressions
    def eval(self, n, env, cd):
        k = n.kind
        if k == "lit":
            return n.value
        if k == "name":
            if n.name in env:
                return env[n.name]
            this = env.get("this")
            if isinstance(this, Obj) and n.name in this.fields:
                return this.fields[n.name]
            if (cd.fqn, n.name) in self.statics:
                return self.statics[(cd.fqn, n.name)]
            fqn = self.w.resolve(n.name, cd)
            if fqn:
                return StaticRef(fqn)
            self.throw("java.lang.NoSuchFieldError", n.name)
        if k == "this":
            return env.get("this")
        if k == "field":
            target = self.static_or_eval(n.target, env, cd)
            if isinstance(target, StaticRef):
                dotted = target.fqn + "." + n.name
                if self.w.known(dotted):
                    return StaticRef(dotted)
                return self.statics.get((target.fqn, n.name))
            if isinstance(target, Obj):
                return target.fields.get(n.name)
            if target is None:
                self.throw("java.lang.NullPointerException", "field " + n.name)
            if n.name == "length" and isinstance(target, list):
                return len(target)
            return Opaque(None)
        if k == "new":
            args = [self.eval(a, env, cd) for a in n.args]
            fqn = self.w.resolve(n.type, cd) or n.type
            if fqn in self.w.classes and n.body is not None:
                return Obj(fqn)
            v = self.construct(fqn, args, n.line)
            if fqn == "javax.xml.namespace.QName" and args:
                v.local = args[-1] if isinstance(args[-1], str) else ""
            return v
        if k == "newarray":
            size = self.eval(n.size, env, cd)
            return [None] * (size if isinstance(size, int) else 0)
        if k == "call":
            if n.target is None and n.name == "assertThrows":
                return self.assert_throws(n, env, cd)
            target = None if n.target is None else self.static_or_eval(n.target, env, cd)
            args = [self.eval(a, env, cd) for a in n.args]
            if n.target is not None and target is None:
                self.here(n.line)
                self.throw("java.lang.NullPointerException",
                           'Cannot invoke "%s()" because value is null' % n.name)
            self.here(n.line)
            return self.call(target, n.name, args, cd, n.line, env)
        if k == "ctorcall":
            return None
        if k == "assign":
            value = self.eval(n.value, env, cd)
            if n.op != "=":
                cur = self.eval(n.target, env, cd)
                value = cur + value if n.op == "+=" else cur - value
            self.store(n.target, value, env, cd)
            return value
        if k == "incdec":
            cur = self.eval(n.target, env, cd) or 0
            new = cur + (1 if n.op == "++" else -1)
            self.store(n.target, new, env, cd)
            return cur if getattr(n, "post", False) else new
        if k == "unary":
            v = self.eval(n.value, env, cd)
            return (not truthy(v)) if n.op == "!" else -v
        if k == "cast":
            return self.eval(n.value, env, cd)
        if k == "cond":
            return self.eval(n.a if truthy(self.eval(n.cond, env, cd)) else n.b, env, cd)
        if k == "instanceof":
            v = self.eval(n.value, env, cd)
            want = self.w.resolve(n.type, cd) or n.type
            return isinstance(v, (Obj, Opaque)) and (v.fqn == want or self.w.is_subtype(v.fqn, want))
        if k == "classlit":
            t = self.static_or_eval(n.type, env, cd)
            return t.fqn if isinstance(t, StaticRef) else None
        if k == "lambda":
            return Lambda(n, dict(env), cd)
        if k == "bin":
            if n.op == "&&":
                return truthy(self.eval(n.a, env, cd)) and truthy(self.eval(n.b, env, cd))
            if n.op == "||":
                return truthy(self.eval(n.a, env, cd)) or truthy(self.eval(n.b, env, cd))
            a, b = self.eval(n.a, env, cd), self.eval(n.b, env, cd)
            if n.op in ("==", "!="):
                same = (a is None or a is NULL) and (b is None or b is NULL) or a is b or (
                    not isinstance(a, (Obj, Opaque)) and a == b)
                return same if n.op == "==" else not same
            if n.op == "+":
                if isinstance(a, str) or isinstance(b, str):
                    return show(a) + show(b)
                return (a or 0) + (b or 0)
            a, b = a or 0, b or 0
            return {"-": lambda: a - b, "*": lambda: a * b, "/": lambda: a // b if b else self.throw(
                "java.lang.ArithmeticException", "/ by zero"), "%": lambda: a % b,
                "<": lambda: a < b, ">": lambda: a > b, "<=": lambda: a <= b, ">=": lambda: a >= b}[n.op]()
        return None

    def static_or_eval(self, n, env, cd):
        if n.kind == "name" and n.name not in env:
            this = env.get("this")
            if not (isinstance(this, Obj) and n.name in this.fields):
                fqn = self.w.resolve(n.name, cd)
                if fqn:
                    return StaticRef(fqn)
        if n.kind == "field":
            parts, cur = [], n
            while cur.kind == "field":
                parts.append(cur.name)
                cur = cur.target
            if cur.kind == "name" and cur.name not in env:
                dotted = ".".join([cur.name] + list(reversed(parts)))
                if self.w.known(dotted):
                    return StaticRef(dotted)
        return self.eval(n, env, cd)

    def store(self, target, value, env, cd):
        if target.kind == "name":
            this = env.get("this")
            if target.name in env or not isinstance(this, Obj):
                env[target.name] = value
            else:
                this.fields[target.name] = value
        elif target.kind == "field":
            obj = self.eval(target.target, env, cd)
            if isinstance(obj, Obj):
                obj.fields[target.name] = value

    def assert_throws(self, n, env, cd):
        expected = self.eval(n.args[0], env, cd)
        lam = self.eval(n.args[1], env, cd)
        try:
            lam.run(self)
        except JavaThrow as t:
            if t.fqn == expected or self.w.is_subtype(t.fqn, expected) or expected in (
                    "java.lang.Exception", "java.lang.Throwable", "java.lang.RuntimeException"):
                return exception_value(t)
            self.throw("java.lang.AssertionError",
                       "Unexpected exception type thrown, expected: <%s> but was: <%s>" % (expected, t.fqn))
        self.throw("java.lang.AssertionError", "Expected %s to be thrown, but nothing was thrown." % expected)


class StaticRef:
    def __init__(self, fqn):
        self.fqn = fqn


class _Null:
    pass


NULL = _Null()


class Lambda:
    def __init__(self, node, env, cd):
        self.node, self.env, self.cd = node, env, cd

    def run(self, interp):
        if self.node.body is not None:
            try:
                interp.exec(self.node.body, self.env, self.cd)
            except Return as r:
                return r.value
            return None
        return interp.eval(self.node.value, self.env, self.cd)


def exception_value(t):
    o = Opaque(t.fqn)
    o.message = t.message
    return o


def default(ftype):
    if ftype in ("int", "long", "short", "byte", "double", "float", "char"):
        return 0
    if ftype == "boolean":
        return False
    return None


def truthy(v):
    return bool(v) and v is not NULL


def show(v):
    if v is None or v is NULL:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (Obj, Opaque)):
        return v.fqn + "@1"
    return str(v)


def string_method(s, name, args):
    if name == "length":
        return len(s)
    if name == "isEmpty":
        return len(s) == 0
    if name == "equals":
        return args and s == args[0]
    if name == "contains":
        return args and isinstance(args[0], str) and args[0] in s
    if name == "startsWith":
        return s.startswith(args[0])
    if name == "toString" or name == "trim":
        return s.strip() if name == "trim" else s
    if name == "toUpperCase":
        return s.upper()
    return Opaque(None)

# ---------------------------------------------------------------------------------- drivers

def load_test(path):
    with open(path) as f:
        src = f.read()
    parser = Parser(tokenize(src))
    c = parser.unit()
    c.file = path
    return c


def annotation_names(m):
    return [a[0].rsplit(".", 1)[-1] for a in m.annotations]


def test_methods(tc):
    return [m for m in tc.methods if "Test" in annotation_names(m)]


def expected_exception(m, tc, world):
    for name, args in m.annotations:
        if name.rsplit(".", 1)[-1] == "Test" and args and "expected" in args:
            i = args.index("expected")
            written = [t for t in args[i + 2:] if t not in ("(", ")", ",")]
            if "class" in written:
                written = written[:written.index("class") - 1]
            dotted = "".join(written)
            return world.resolve(dotted, tc) or dotted
    return None


def run_one(world, tc, m):
    interp = Interp(world, tc)
    this = Obj(tc.fqn)
    start = time.time()
    error = None
    fname = os.path.basename(tc.file)
    try:
        for f in tc.fields:
            this.fields[f[0]] = None
        for setup in tc.methods:
            if set(annotation_names(setup)) & {"Before", "BeforeEach"}:
                interp.stack.append((tc.fqn, setup.name, fname, setup.line))
                interp.invoke(tc, setup, this, [])
                interp.stack.pop()
        interp.stack.append((tc.fqn, m.name, fname, m.line))
        try:
            interp.exec(m.body, {"this": this}, tc)
        except Return:
            pass
        expected = expected_exception(m, tc, world)
        if expected:
            error = JavaThrow("java.lang.AssertionError", "Expected exception: " + expected, [(tc.fqn, m.name, fname, m.line)])
    except JavaThrow as t:
        expected = expected_exception(m, tc, world)
        if not (expected and (t.fqn == expected or world.is_subtype(t.fqn, expected))):
            error = t
    except RecursionError:
        error = JavaThrow("java.lang.StackOverflowError", None, [(tc.fqn, m.name, fname, m.line)])
    return error, time.time() - start, interp


def format_trace(t):
    head = t.fqn + (": " + str(t.message) if t.message is not None else "")
    lines = [head] + ["\tat %s.%s(%s:%d)" % (c, meth, f, ln) for c, meth, f, ln in t.frames]
    return "\n".join(lines) + "\n"


def surefire(tc, results):
    failures = sum(1 for _, e, _ in results if e and e.fqn == "java.lang.AssertionError")
    errors = sum(1 for _, e, _ in results if e and e.fqn != "java.lang.AssertionError")
    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           '<testsuite name=%s tests="%d" failures="%d" errors="%d" skipped="0">'
           % (quoteattr(tc.fqn), len(results), failures, errors)]
    for name, err, secs in results:
        out.append('  <testcase name=%s classname=%s time="%.3f"%s' % (quoteattr(name), quoteattr(tc.fqn), secs,
                                                                       ">" if err else "/>"))
        if err:
            tag = "failure" if err.fqn == "java.lang.AssertionError" else "error"
            msg = "" if err.message is None else ' message=%s' % quoteattr(str(err.message))
            out.append('    <%s%s type=%s>%s</%s>' % (tag, msg, quoteattr(err.fqn), escape(format_trace(err)), tag))
            out.append("  </testcase>")
    out.append("</testsuite>")
    return "\n".join(out) + "\n"


def jacoco(world, covered, branches, name):
    out = ['<?xml version="1.0" encoding="UTF-8" standalone="yes"?>',
           '<!DOCTYPE report PUBLIC "-//JACOCO//DTD Report 1.1//EN" "report.dtd">',
           '<report name=%s>' % quoteattr(name)]
    by_pkg = {}
    for c in world.classes.values():
        by_pkg.setdefault(c.package, []).append(c)
    for pkg in sorted(by_pkg):
        out.append('  <package name=%s>' % quoteattr(pkg.replace(".", "/")))
        for c in sorted(by_pkg[pkg], key=lambda c: c.name):
            out.append('    <class name=%s sourcefilename=%s/>' % (quoteattr(c.fqn.replace(".", "/")),
                                                                   quoteattr(os.path.basename(c.file))))
        for c in sorted(by_pkg[pkg], key=lambda c: c.name):
            out.append('    <sourcefile name=%s>' % quoteattr(os.path.basename(c.file)))
            hit = covered.get(c.file, set())
            for line in sorted(c.lines):
                ci = 1 if line in hit else 0
                mb = cb = 0
                if line in c.branch_lines:
                    seen = branches.get((c.file, line), set())
                    cb = len(seen)
                    mb = 2 - cb
                out.append('      <line nr="%d" mi="%d" ci="%d" mb="%d" cb="%d"/>' % (line, 1 - ci, ci, mb, cb))
            out.append('    </sourcefile>')
        out.append('  </package>')
    out.append('</report>')
    return "\n".join(out) + "\n"


def report_compile_errors(path, src_lines, errors):
    for e in errors:
        sys.stderr.write("%s:%d: error: %s\n" % (path, e.line, e.message))
        if 0 < e.line <= len(src_lines):
            sys.stderr.write(src_lines[e.line - 1] + "\n")
        if e.symbol:
            sys.stderr.write("  symbol:   %s\n" % e.symbol)
        if e.location:
            sys.stderr.write("  location: %s\n" % e.location)
    sys.stderr.write("%d error%s\n" % (len(errors), "" if len(errors) == 1 else "s"))


def compile_file(world, path):
    with open(path) as f:
        src = f.read()
    try:
        tc = load_test(path)
    except CompileError as e:
        return None, [e], src
    return tc, Checker(world, tc).check(), src


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("mode", choices=["compile", "run", "coverage"])
    ap.add_argument("--project", required=True)
    ap.add_argument("--test", required=True)
    ap.add_argument("--method")
    ap.add_argument("--reports")
    ap.add_argument("--out")
    a = ap.parse_args()
    sys.setrecursionlimit(4000)

    world = World(a.project)
    tc, errors, src = compile_file(world, a.test)
    if errors:
        report_compile_errors(a.test, src.split("\n"), errors)
        return 1
    if a.mode == "compile":
        return 0

    methods = test_methods(tc)
    if a.method:
        methods = [m for m in methods if m.name == a.method]
        if not methods:
            sys.stderr.write("No tests matching %s\n" % a.method)
            return 1
    results, covered, branches = [], {}, {}
    for m in methods:
        err, secs, interp = run_one(world, tc, m)
        results.append((m.name, err, secs))
        for f, lines in interp.covered.items():
            covered.setdefault(f, set()).update(lines)
        for key, seen in interp.branches.items():
            branches.setdefault(key, set()).update(seen)
    if a.reports:
        os.makedirs(a.reports, exist_ok=True)
        with open(os.path.join(a.reports, "TEST-%s.xml" % tc.fqn), "w") as f:
            f.write(surefire(tc, results))
    if a.mode == "coverage":
        os.makedirs(os.path.dirname(os.path.abspath(a.out)), exist_ok=True)
        with open(a.out, "w") as f:
            f.write(jacoco(world, covered, branches, os.path.basename(os.path.abspath(a.project))))
    return 1 if any(e for _, e, _ in results) and a.mode == "run" else 0


if __name__ == "__main__":
    sys.exit(main())
