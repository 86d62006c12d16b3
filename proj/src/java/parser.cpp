#include "mockless/java/parser.hpp"

#include <algorithm>
#include <unordered_set>

namespace mockless::java {

// ---- AST helpers --------------------------------------------------------------

std::string TypeRef::erased() const {
    std::string out = name;
    for (int i = 0; i < array_dims; ++i) out += "[]";
    return out;
}

bool TypeRef::is_primitive() const {
    static const std::unordered_set<std::string> prims = {"boolean", "byte", "char", "short", "int",
                                                          "long", "float", "double", "void"};
    return array_dims == 0 && prims.count(name) != 0;
}

bool MethodDecl::has_modifier(const std::string& m) const {
    return std::find(modifiers.begin(), modifiers.end(), m) != modifiers.end();
}

bool MethodDecl::has_annotation(const std::string& simple_name) const {
    for (const auto& a : annotations) {
        auto pos = a.rfind('.');
        std::string simple = pos == std::string::npos ? a : a.substr(pos + 1);
        if (simple == simple_name) return true;
    }
    return false;
}

bool FieldDecl::has_modifier(const std::string& m) const {
    return std::find(modifiers.begin(), modifiers.end(), m) != modifiers.end();
}

bool TypeDecl::has_modifier(const std::string& m) const {
    return std::find(modifiers.begin(), modifiers.end(), m) != modifiers.end();
}

namespace {

const std::unordered_set<std::string_view> kPrimitives = {"boolean", "byte", "char", "short", "int",
                                                          "long", "float", "double"};
const std::unordered_set<std::string_view> kModifiers = {
    "public", "protected", "private", "static", "final", "abstract", "native", "synchronized",
    "transient", "volatile", "strictfp", "default", "sealed"};

class Parser {
public:
    explicit Parser(std::vector<Token>& tokens) : toks_(tokens) {}

    CompilationUnit compilation_unit() {
        CompilationUnit cu;
        // Package annotations are legal; skip them.
        std::size_t save = pos_;
        skip_annotations();
        if (is("package")) {
            advance();
            cu.package = qualified_name();
            expect(";");
        } else {
            pos_ = save;
        }
        while (is("import")) {
            ImportDecl imp;
            imp.line = peek().line;
            advance();
            if (is("static")) {
                advance();
                imp.is_static = true;
            }
            imp.name = ident();
            while (is(".")) {
                advance();
                if (is("*")) {
                    advance();
                    imp.wildcard = true;
                    break;
                }
                imp.name += "." + ident();
            }
            expect(";");
            cu.imports.push_back(std::move(imp));
        }
        while (!at_end()) {
            if (is(";")) {
                advance();
                continue;
            }
            if (is_ident_text("module") || is_ident_text("open")) {
                // module-info.java: nothing to index.
                while (!at_end()) advance();
                break;
            }
            cu.types.push_back(type_declaration());
        }
        return cu;
    }

    MethodDecl lone_method() {
        std::vector<std::string> mods, annos;
        modifiers(mods, annos);
        if (is("<")) skip_balanced_angles();
        MethodDecl m;
        std::size_t start = pos_;
        if (peek().kind == TokenKind::Identifier && peek(1).text == "(") {
            m.is_constructor = true;
            m.name = ident();
        } else {
            m.return_type = type();
            m.name = ident();
        }
        m.modifiers = std::move(mods);
        m.annotations = std::move(annos);
        method_rest(m, start);
        if (!at_end()) fail("unexpected trailing tokens after method");
        return m;
    }

    std::vector<std::unique_ptr<Stmt>> statements_until_end() {
        std::vector<std::unique_ptr<Stmt>> out;
        while (!at_end()) out.push_back(block_statement());
        return out;
    }

private:
    std::vector<Token>& toks_;
    std::size_t pos_ = 0;
    bool no_lambda_ = false;

    // ---- token access -------------------------------------------------------

    const Token& peek(std::size_t k = 0) const {
        std::size_t i = std::min(pos_ + k, toks_.size() - 1);
        return toks_[i];
    }
    bool at_end() const { return peek().kind == TokenKind::End; }
    bool is(std::string_view text, std::size_t k = 0) const {
        const Token& t = peek(k);
        return t.kind != TokenKind::End && t.kind != TokenKind::StringLiteral && t.kind != TokenKind::CharLiteral && t.text == text;
    }
    bool is_ident_text(std::string_view text) const { return peek().kind == TokenKind::Identifier && peek().text == text; }
    bool is_plain_ident(std::size_t k = 0) const {
        const Token& t = peek(k);
        return t.kind == TokenKind::Identifier && !is_keyword(t.text);
    }
    const Token& advance() {
        const Token& t = toks_[pos_];
        if (pos_ + 1 < toks_.size()) ++pos_;
        return t;
    }
    [[noreturn]] void fail(const std::string& msg) const {
        const Token& t = peek();
        std::string near = t.kind == TokenKind::End ? "end of input" : "'" + t.text + "'";
        throw ParseError(msg + " near " + near, t.line, t.column);
    }
    void expect(std::string_view text) {
        if (!is(text)) fail("expected '" + std::string(text) + "'");
        advance();
    }
    std::string ident() {
        if (!is_plain_ident()) fail("expected identifier");
        return advance().text;
    }
    std::string qualified_name() {
        std::string name = ident();
        while (is(".") && is_plain_ident(1)) {
            advance();
            name += "." + advance().text;
        }
        return name;
    }
    // `>` followed immediately by another `>` or `=` forms a compound operator.
    bool adjacent(std::size_t k) const { return !peek(k).space_before; }

    // ---- annotations and modifiers ----------------------------------------------

    std::string annotation() {
        expect("@");
        std::string name = qualified_name();
        if (is("(")) skip_balanced("(", ")");
        return name;
    }
    void skip_annotations() {
        while (is("@") && !is("interface", 1)) annotation();
    }
    void modifiers(std::vector<std::string>& mods, std::vector<std::string>& annos) {
        for (;;) {
            if (is("@") && !is("interface", 1)) {
                annos.push_back(annotation());
            } else if (peek().kind == TokenKind::Identifier && kModifiers.count(peek().text) &&
                       !(peek().text == "default" && (is(":", 1) || is("->", 1)))) {
                mods.push_back(advance().text);
            } else if (is_ident_text("non") && is("-", 1) && peek(2).text == "sealed") {
                advance();
                advance();
                advance();
                mods.emplace_back("non-sealed");
            } else {
                break;
            }
        }
    }
    void skip_balanced(std::string_view open, std::string_view close) {
        expect(open);
        int depth = 1;
        while (depth > 0) {
            if (at_end()) fail("unbalanced '" + std::string(open) + "'");
            if (is(open)) ++depth;
            else if (is(close)) --depth;
            advance();
        }
    }
    void skip_balanced_angles() {
        expect("<");
        int depth = 1;
        while (depth > 0) {
            if (at_end()) fail("unbalanced '<'");
            if (is("<")) ++depth;
            else if (is(">")) --depth;
            else if (is("<<")) depth += 2;
            advance();
        }
    }

    // ---- types ---------------------------------------------------------------

    TypeRef type() {
        skip_annotations();
        TypeRef t;
        t.line = peek().line;
        t.column = peek().column;
        if (peek().kind == TokenKind::Identifier && (kPrimitives.count(peek().text) || peek().text == "void")) {
            t.name = advance().text;
        } else if (is("?")) {
            advance();
            t.name = "?";
            if (is("extends") || is("super")) {
                advance();
                t.args.push_back(type());
            }
            return t;
        } else {
            t.name = ident();
            if (is("<")) type_args(t.args);
            while (is(".") && (is_plain_ident(1) || is("@", 1))) {
                advance();
                skip_annotations();
                t.name += "." + ident();
                if (is("<")) {
                    t.args.clear();
                    type_args(t.args);
                }
            }
        }
        dims(t.array_dims);
        return t;
    }
    void type_args(std::vector<TypeRef>& out) {
        expect("<");
        if (is(">")) {
            advance();
            return;
        }
        for (;;) {
            out.push_back(type());
            if (is("&")) {  // intersection bound inside type parameters
                advance();
                continue;
            }
            if (is(",")) {
                advance();
                continue;
            }
            expect(">");
            return;
        }
    }
    void dims(int& count) {
        for (;;) {
            std::size_t save = pos_;
            skip_annotations();
            if (is("[") && is("]", 1)) {
                advance();
                advance();
                ++count;
            } else {
                pos_ = save;
                return;
            }
        }
    }
    bool try_type(TypeRef& out) {
        std::size_t save = pos_;
        try {
            out = type();
            return true;
        } catch (const ParseError&) {
            pos_ = save;
            return false;
        }
    }

    // ---- declarations -----------------------------------------------------------

    std::shared_ptr<TypeDecl> type_declaration() {
        std::vector<std::string> mods, annos;
        modifiers(mods, annos);
        auto decl = std::make_shared<TypeDecl>();
        decl->modifiers = std::move(mods);
        decl->annotations = std::move(annos);
        decl->line = peek().line;
        if (is("class")) {
            advance();
            decl->kind = TypeKind::Class;
        } else if (is("interface")) {
            advance();
            decl->kind = TypeKind::Interface;
        } else if (is("enum")) {
            advance();
            decl->kind = TypeKind::Enum;
        } else if (is("@") && is("interface", 1)) {
            advance();
            advance();
            decl->kind = TypeKind::Annotation;
        } else if (is_ident_text("record") && is_plain_ident(1)) {
            advance();
            decl->kind = TypeKind::Record;
        } else {
            fail("expected type declaration");
        }
        decl->name = ident();
        if (is("<")) skip_balanced_angles();
        if (decl->kind == TypeKind::Record) {
            expect("(");
            while (!is(")")) {
                std::vector<std::string> m, a;
                modifiers(m, a);
                Param p;
                p.type = type();
                if (is("...")) {
                    advance();
                    p.varargs = true;
                    p.type.array_dims++;
                }
                p.name = ident();
                decl->record_components.push_back(std::move(p));
                if (is(",")) advance();
            }
            expect(")");
        }
        for (;;) {
            if (is("extends")) {
                advance();
                decl->extends.push_back(type());
                while (is(",")) {
                    advance();
                    decl->extends.push_back(type());
                }
            } else if (is("implements")) {
                advance();
                decl->implements.push_back(type());
                while (is(",")) {
                    advance();
                    decl->implements.push_back(type());
                }
            } else if (is_ident_text("permits")) {
                advance();
                type();
                while (is(",")) {
                    advance();
                    type();
                }
            } else {
                break;
            }
        }
        class_body(*decl);
        return decl;
    }

    void class_body(TypeDecl& decl) {
        expect("{");
        if (decl.kind == TypeKind::Enum) enum_constants(decl);
        while (!is("}")) {
            if (at_end()) fail("unterminated class body");
            member(decl);
        }
        decl.end_line = peek().line;
        advance();
    }

    void enum_constants(TypeDecl& decl) {
        while (!is(";") && !is("}")) {
            skip_annotations();
            decl.enum_constants.push_back(ident());
            if (is("(")) skip_balanced("(", ")");
            if (is("{")) {
                TypeDecl anon;
                anon.name = decl.enum_constants.back();
                class_body(anon);
            }
            if (is(",")) advance();
            else break;
        }
        if (is(";")) advance();
    }

    void member(TypeDecl& decl) {
        if (is(";")) {
            advance();
            return;
        }
        std::size_t start = pos_;
        std::vector<std::string> mods, annos;
        modifiers(mods, annos);
        if (is("{")) {  // instance or static initializer
            block();
            return;
        }
        if (is("class") || is("interface") || is("enum") || (is("@") && is("interface", 1)) ||
            (is_ident_text("record") && is_plain_ident(1) && (is("(", 2) || is("<", 2)))) {
            pos_ = start;
            decl.nested.push_back(type_declaration());
            return;
        }
        if (is("<")) skip_balanced_angles();
        int line = peek().line;
        if (peek().kind == TokenKind::Identifier && peek().text == decl.name && is("(", 1)) {
            MethodDecl m;
            m.is_constructor = true;
            m.name = advance().text;
            m.modifiers = std::move(mods);
            m.annotations = std::move(annos);
            m.line = line;
            method_rest(m, start);
            decl.methods.push_back(std::move(m));
            return;
        }
        if (decl.kind == TypeKind::Record && peek().text == decl.name && is("{", 1)) {
            advance();  // compact canonical constructor
            MethodDecl m;
            m.is_constructor = true;
            m.name = decl.name;
            m.modifiers = std::move(mods);
            m.line = line;
            m.params = decl.record_components;
            m.body = block();
            m.tok_begin = start;
            m.tok_end = pos_;
            m.end_line = toks_[pos_ - 1].line;
            decl.methods.push_back(std::move(m));
            return;
        }
        TypeRef t = type();
        std::string name = ident();
        if (is("(")) {
            MethodDecl m;
            m.name = std::move(name);
            m.return_type = std::move(t);
            m.modifiers = std::move(mods);
            m.annotations = std::move(annos);
            m.line = line;
            method_rest(m, start);
            if (decl.kind == TypeKind::Interface && !m.body && !m.has_modifier("static") &&
                !m.has_modifier("default") && !m.has_modifier("abstract")) {
                m.modifiers.emplace_back("abstract");
            }
            decl.methods.push_back(std::move(m));
            return;
        }
        FieldDecl f;
        f.modifiers = std::move(mods);
        f.type = std::move(t);
        f.line = line;
        declarators(f.vars, std::move(name));
        expect(";");
        decl.fields.push_back(std::move(f));
    }

    void method_rest(MethodDecl& m, std::size_t start) {
        if (m.line == 0) m.line = toks_[start].line;
        m.tok_begin = start;
        expect("(");
        while (!is(")")) {
            std::vector<std::string> pm, pa;
            modifiers(pm, pa);
            Param p;
            p.type = type();
            if (is("...")) {
                advance();
                p.varargs = true;
                p.type.array_dims++;
            }
            if (is("this")) {  // receiver parameter
                advance();
                if (is(",")) advance();
                continue;
            }
            p.name = ident();
            dims(p.type.array_dims);
            m.params.push_back(std::move(p));
            if (is(",")) advance();
            else break;
        }
        expect(")");
        dims(m.return_type.array_dims);
        if (is("throws")) {
            advance();
            m.throws.push_back(type());
            while (is(",")) {
                advance();
                m.throws.push_back(type());
            }
        }
        if (is("default")) {  // annotation element default
            advance();
            element_value();
        }
        if (is("{")) {
            m.body = block();
        } else {
            expect(";");
        }
        m.tok_end = pos_;
        m.end_line = toks_[pos_ - 1].line;
    }

    void element_value() {
        if (is("{")) {
            skip_balanced("{", "}");
        } else if (is("@")) {
            annotation();
        } else {
            expression();
        }
    }

    void declarators(std::vector<VarDeclarator>& out, std::string first_name) {
        std::string name = std::move(first_name);
        for (;;) {
            VarDeclarator v;
            v.name = std::move(name);
            v.line = toks_[pos_ - 1].line;
            dims(v.extra_dims);
            if (is("=")) {
                advance();
                v.init = is("{") ? array_init() : expression();
            }
            out.push_back(std::move(v));
            if (!is(",")) break;
            advance();
            name = ident();
        }
    }

    // ---- statements ---------------------------------------------------------------

    std::unique_ptr<Stmt> make_stmt(StmtKind kind, std::size_t begin) {
        auto s = std::make_unique<Stmt>();
        s->kind = kind;
        s->tok_begin = begin;
        s->line = toks_[begin].line;
        return s;
    }
    std::unique_ptr<Stmt> finish(std::unique_ptr<Stmt> s) {
        s->tok_end = pos_;
        s->end_line = toks_[pos_ > 0 ? pos_ - 1 : 0].line;
        return s;
    }

    std::unique_ptr<Stmt> block() {
        auto s = make_stmt(StmtKind::Block, pos_);
        expect("{");
        while (!is("}")) {
            if (at_end()) fail("unterminated block");
            s->children.push_back(block_statement());
        }
        advance();
        return finish(std::move(s));
    }

    bool looks_like_local_var() {
        std::size_t save = pos_;
        bool result = false;
        try {
            if (is("final") || (is("@") && !is("interface", 1))) {
                result = true;
            } else if (peek().kind == TokenKind::Identifier && (is_plain_ident() || kPrimitives.count(peek().text))) {
                type();
                if (is_plain_ident() && (is("=", 1) || is(";", 1) || is(",", 1) || is("[", 1) || is(":", 1))) result = true;
            }
        } catch (const ParseError&) {
            result = false;
        }
        pos_ = save;
        return result;
    }

    std::unique_ptr<Stmt> local_var(bool require_semicolon = true) {
        auto s = make_stmt(StmtKind::LocalVar, pos_);
        std::vector<std::string> mods, annos;
        modifiers(mods, annos);
        s->var_type = type();
        std::string name = ident();
        declarators(s->vars, std::move(name));
        if (require_semicolon) expect(";");
        return finish(std::move(s));
    }

    std::unique_ptr<Stmt> block_statement() {
        std::size_t start = pos_;
        // Local classes / records / interfaces.
        {
            std::vector<std::string> mods, annos;
            modifiers(mods, annos);
            if (is("class") || is("interface") || is("enum") ||
                (is_ident_text("record") && is_plain_ident(1) && (is("(", 2) || is("<", 2)))) {
                pos_ = start;
                auto s = make_stmt(StmtKind::LocalClass, pos_);
                s->local_class = type_declaration();
                return finish(std::move(s));
            }
            pos_ = start;
        }
        if (looks_like_local_var()) return local_var();
        return statement();
    }

    std::unique_ptr<Stmt> statement() {
        std::size_t start = pos_;
        if (is("{")) return block();
        if (is(";")) {
            advance();
            return finish(make_stmt(StmtKind::Empty, start));
        }
        if (is("if")) {
            auto s = make_stmt(StmtKind::If, start);
            advance();
            s->expr = paren_expr();
            s->then_branch = statement();
            if (is("else")) {
                advance();
                s->else_branch = statement();
            }
            return finish(std::move(s));
        }
        if (is("while")) {
            auto s = make_stmt(StmtKind::While, start);
            advance();
            s->expr = paren_expr();
            s->body = statement();
            return finish(std::move(s));
        }
        if (is("do")) {
            auto s = make_stmt(StmtKind::DoWhile, start);
            advance();
            s->body = statement();
            expect("while");
            s->expr = paren_expr();
            expect(";");
            return finish(std::move(s));
        }
        if (is("for")) return for_statement();
        if (is("try")) return try_statement();
        if (is("switch")) {
            auto s = make_stmt(StmtKind::Switch, start);
            advance();
            s->expr = paren_expr();
            switch_body(*s);
            return finish(std::move(s));
        }
        if (is("return") || is("throw")) {
            auto s = make_stmt(is("return") ? StmtKind::Return : StmtKind::Throw, start);
            advance();
            if (!is(";")) s->expr = expression();
            expect(";");
            return finish(std::move(s));
        }
        if (is("break") || is("continue")) {
            auto s = make_stmt(is("break") ? StmtKind::Break : StmtKind::Continue, start);
            advance();
            if (is_plain_ident()) s->label = advance().text;
            expect(";");
            return finish(std::move(s));
        }
        if (is("synchronized")) {
            auto s = make_stmt(StmtKind::Synchronized, start);
            advance();
            s->expr = paren_expr();
            s->body = block();
            return finish(std::move(s));
        }
        if (is("assert")) {
            auto s = make_stmt(StmtKind::Assert, start);
            advance();
            s->expr = expression();
            if (is(":")) {
                advance();
                expression();
            }
            expect(";");
            return finish(std::move(s));
        }
        if (is_ident_text("yield") && !is("=", 1) && !is("(", 1) && !is(".", 1) && !is("[", 1) &&
            !is("++", 1) && !is("--", 1)) {
            auto s = make_stmt(StmtKind::Yield, start);
            advance();
            s->expr = expression();
            expect(";");
            return finish(std::move(s));
        }
        if (is_plain_ident() && is(":", 1)) {
            auto s = make_stmt(StmtKind::Labeled, start);
            s->label = advance().text;
            advance();
            s->body = statement();
            return finish(std::move(s));
        }
        if ((is("this") || is("super")) && is("(", 1)) {
            auto s = make_stmt(StmtKind::ExplicitCtorCall, start);
            s->expr = expression();
            expect(";");
            return finish(std::move(s));
        }
        auto s = make_stmt(StmtKind::Expression, start);
        s->expr = expression();
        expect(";");
        return finish(std::move(s));
    }

    std::unique_ptr<Stmt> for_statement() {
        std::size_t start = pos_;
        advance();
        expect("(");
        // Enhanced for: [mods] Type name :
        {
            std::size_t save = pos_;
            bool enhanced = false;
            try {
                std::vector<std::string> mods, annos;
                modifiers(mods, annos);
                type();
                if (is_plain_ident() && is(":", 1)) enhanced = true;
            } catch (const ParseError&) {
            }
            pos_ = save;
            if (enhanced) {
                auto s = make_stmt(StmtKind::ForEach, start);
                std::vector<std::string> mods, annos;
                modifiers(mods, annos);
                s->var_type = type();
                VarDeclarator v;
                v.line = peek().line;
                v.name = ident();
                expect(":");
                v.init = expression();
                s->vars.push_back(std::move(v));
                expect(")");
                s->body = statement();
                return finish(std::move(s));
            }
        }
        auto s = make_stmt(StmtKind::For, start);
        if (!is(";")) {
            if (looks_like_local_var()) {
                s->children.push_back(local_var(false));
            } else {
                for (;;) {
                    auto e = make_stmt(StmtKind::Expression, pos_);
                    e->expr = expression();
                    s->children.push_back(finish(std::move(e)));
                    if (!is(",")) break;
                    advance();
                }
            }
        }
        expect(";");
        if (!is(";")) s->expr = expression();
        expect(";");
        while (!is(")")) {
            s->updates.push_back(expression());
            if (is(",")) advance();
            else break;
        }
        expect(")");
        s->body = statement();
        return finish(std::move(s));
    }

    std::unique_ptr<Stmt> try_statement() {
        auto s = make_stmt(StmtKind::Try, pos_);
        advance();
        if (is("(")) {
            advance();
            while (!is(")")) {
                if (looks_like_local_var()) {
                    s->children.push_back(local_var(false));
                } else {
                    auto e = make_stmt(StmtKind::Expression, pos_);
                    e->expr = expression();
                    s->children.push_back(finish(std::move(e)));
                }
                if (is(";")) advance();
                else break;
            }
            expect(")");
        }
        s->body = block();
        while (is("catch")) {
            CatchClause c;
            c.line = peek().line;
            advance();
            expect("(");
            std::vector<std::string> mods, annos;
            modifiers(mods, annos);
            c.types.push_back(type());
            while (is("|")) {
                advance();
                c.types.push_back(type());
            }
            c.var = ident();
            expect(")");
            c.body = block();
            s->catches.push_back(std::move(c));
        }
        if (is("finally")) {
            advance();
            s->finally_block = block();
        }
        if (s->catches.empty() && !s->finally_block && s->children.empty()) fail("try without catch or finally");
        return finish(std::move(s));
    }

    void switch_body(Stmt& s) {
        expect("{");
        while (!is("}")) {
            if (at_end()) fail("unterminated switch");
            SwitchCase c;
            c.line = peek().line;
            if (is("default")) {
                advance();
                c.is_default = true;
            } else {
                expect("case");
                bool saved = no_lambda_;
                no_lambda_ = true;
                for (;;) {
                    if (is("default")) {  // `case null, default`
                        advance();
                        c.is_default = true;
                    } else {
                        c.labels.push_back(case_label());
                    }
                    if (is(",")) {
                        advance();
                        continue;
                    }
                    break;
                }
                no_lambda_ = saved;
            }
            if (is("->")) {
                advance();
                c.arrow = true;
                if (is("{")) {
                    c.body.push_back(block());
                } else if (is("throw")) {
                    c.body.push_back(statement());
                } else {
                    auto e = make_stmt(StmtKind::Expression, pos_);
                    e->expr = expression();
                    expect(";");
                    c.body.push_back(finish(std::move(e)));
                }
            } else {
                expect(":");
                while (!is("case") && !is("default") && !is("}")) {
                    if (at_end()) fail("unterminated switch");
                    c.body.push_back(block_statement());
                }
                // `default ->` is caught above; a bare `default:` keeps going
            }
            s.cases.push_back(std::move(c));
        }
        advance();
    }

    std::unique_ptr<Expr> case_label() {
        // Type pattern: `case Foo f ->`
        std::size_t save = pos_;
        TypeRef t;
        if (try_type(t) && is_plain_ident() && (is("->", 1) || is(":", 1) || is_ident_text("when"))) {
            auto e = make_expr(ExprKind::InstanceOf, save);
            e->type = std::move(t);
            e->text = advance().text;
            return end_expr(std::move(e));
        }
        pos_ = save;
        return ternary();
    }

    std::unique_ptr<Expr> paren_expr() {
        expect("(");
        auto e = expression();
        expect(")");
        return e;
    }

    // ---- expressions -----------------------------------------------------------------

    std::unique_ptr<Expr> make_expr(ExprKind kind, std::size_t begin) {
        auto e = std::make_unique<Expr>();
        e->kind = kind;
        e->tok_begin = begin;
        e->line = toks_[begin].line;
        e->column = toks_[begin].column;
        return e;
    }
    std::unique_ptr<Expr> end_expr(std::unique_ptr<Expr> e) {
        e->tok_end = pos_;
        return e;
    }

    std::unique_ptr<Expr> expression() { return assignment(); }

    // Returns the assignment operator at the cursor and its token length, or 0.
    std::size_t assignment_op(std::string& op) {
        static const std::unordered_set<std::string_view> simple = {"=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<="};
        if (peek().kind == TokenKind::Punct && simple.count(peek().text)) {
            op = peek().text;
            return 1;
        }
        if (is(">") && is(">", 1) && adjacent(1)) {
            if (is("=", 2) && adjacent(2)) {
                op = ">>=";
                return 3;
            }
            if (is(">", 2) && adjacent(2) && is("=", 3) && adjacent(3)) {
                op = ">>>=";
                return 4;
            }
        }
        return 0;
    }

    bool lambda_ahead() {
        if (no_lambda_) return false;
        if (is_plain_ident() && is("->", 1)) return true;
        if (!is("(")) return false;
        std::size_t k = 1;
        int depth = 1;
        while (depth > 0) {
            const Token& t = peek(k);
            if (t.kind == TokenKind::End) return false;
            if (t.kind == TokenKind::Punct) {
                if (t.text == "(") ++depth;
                else if (t.text == ")") --depth;
            }
            ++k;
        }
        return is("->", k);
    }

    std::unique_ptr<Expr> lambda() {
        auto e = make_expr(ExprKind::Lambda, pos_);
        if (is_plain_ident()) {
            e->lambda_params.push_back(advance().text);
        } else {
            expect("(");
            while (!is(")")) {
                std::vector<std::string> mods, annos;
                modifiers(mods, annos);
                if (is_plain_ident() && (is(",", 1) || is(")", 1))) {
                    e->lambda_params.push_back(advance().text);
                } else {
                    type();
                    if (is("...")) advance();
                    e->lambda_params.push_back(ident());
                }
                if (is(",")) advance();
            }
            expect(")");
        }
        expect("->");
        bool saved = no_lambda_;
        no_lambda_ = false;
        if (is("{")) {
            e->lambda_block = block();
        } else {
            e->args.push_back(expression());
        }
        no_lambda_ = saved;
        return end_expr(std::move(e));
    }

    std::unique_ptr<Expr> assignment() {
        if (lambda_ahead()) return lambda();
        std::size_t start = pos_;
        auto lhs = ternary();
        std::string op;
        std::size_t n = assignment_op(op);
        if (n == 0) return lhs;
        for (std::size_t i = 0; i < n; ++i) advance();
        auto e = make_expr(ExprKind::Assign, start);
        e->text = op;
        e->args.push_back(std::move(lhs));
        e->args.push_back(is("{") ? array_init() : assignment());
        return end_expr(std::move(e));
    }

    std::unique_ptr<Expr> ternary() {
        std::size_t start = pos_;
        auto cond = binary(0);
        if (!is("?")) return cond;
        advance();
        auto e = make_expr(ExprKind::Conditional, start);
        e->args.push_back(std::move(cond));
        bool saved = no_lambda_;
        no_lambda_ = false;
        e->args.push_back(assignment());
        expect(":");
        e->args.push_back(lambda_ahead() ? lambda() : ternary());
        no_lambda_ = saved;
        return end_expr(std::move(e));
    }

    // Binary operator at the cursor with its precedence; returns token count or 0.
    std::size_t binary_op(std::string& op, int& prec) {
        const Token& t = peek();
        if (t.kind != TokenKind::Punct && !(t.kind == TokenKind::Identifier && t.text == "instanceof")) return 0;
        if (t.text == "instanceof") {
            op = "instanceof";
            prec = 7;
            return 1;
        }
        if (t.text == ">") {
            if (is(">", 1) && adjacent(1)) {
                if (is(">", 2) && adjacent(2)) {
                    if (is("=", 3) && adjacent(3)) return 0;
                    op = ">>>";
                    prec = 8;
                    return 3;
                }
                if (is("=", 2) && adjacent(2)) return 0;
                op = ">>";
                prec = 8;
                return 2;
            }
            if (is("=", 1) && adjacent(1)) {
                op = ">=";
                prec = 7;
                return 2;
            }
            op = ">";
            prec = 7;
            return 1;
        }
        static const std::vector<std::pair<std::string_view, int>> table = {
            {"||", 1}, {"&&", 2}, {"|", 3}, {"^", 4}, {"&", 5}, {"==", 6}, {"!=", 6},
            {"<", 7},  {"<=", 7}, {"<<", 8}, {"+", 9}, {"-", 9}, {"*", 10}, {"/", 10}, {"%", 10}};
        for (const auto& [text, p] : table) {
            if (t.text == text) {
                op = t.text;
                prec = p;
                return 1;
            }
        }
        return 0;
    }

    std::unique_ptr<Expr> binary(int min_prec) {
        std::size_t start = pos_;
        auto lhs = unary();
        for (;;) {
            std::string op;
            int prec = 0;
            std::size_t n = binary_op(op, prec);
            if (n == 0 || prec <= min_prec) break;
            for (std::size_t i = 0; i < n; ++i) advance();
            if (op == "instanceof") {
                auto e = make_expr(ExprKind::InstanceOf, start);
                if (is("final")) advance();
                e->type = type();
                if (is_plain_ident()) e->text = advance().text;  // pattern binding
                e->args.push_back(std::move(lhs));
                lhs = end_expr(std::move(e));
                continue;
            }
            auto rhs = binary(prec);
            auto e = make_expr(ExprKind::Binary, start);
            e->text = op;
            e->args.push_back(std::move(lhs));
            e->args.push_back(std::move(rhs));
            lhs = end_expr(std::move(e));
        }
        return lhs;
    }

    bool cast_ahead(TypeRef& out) {
        if (!is("(")) return false;
        std::size_t save = pos_;
        advance();
        bool primitive = peek().kind == TokenKind::Identifier && kPrimitives.count(peek().text) != 0;
        TypeRef t;
        if (!try_type(t)) {
            pos_ = save;
            return false;
        }
        while (is("&")) {  // intersection cast
            advance();
            TypeRef extra;
            if (!try_type(extra)) {
                pos_ = save;
                return false;
            }
        }
        if (!is(")")) {
            pos_ = save;
            return false;
        }
        advance();
        const Token& n = peek();
        bool operand = false;
        if (primitive && t.array_dims == 0) {
            operand = n.kind != TokenKind::End && !(n.kind == TokenKind::Punct && (n.text == ")" || n.text == ";" || n.text == "," || n.text == "." || n.text == "]" || n.text == "?" || n.text == ":" || n.text == "=" || n.text == ">" || n.text == "<" || n.text == "==" || n.text == "!=" || n.text == "&&" || n.text == "||" || n.text == "*" || n.text == "/" || n.text == "%" || n.text == "&" || n.text == "|" || n.text == "^" || n.text == "}"));
        } else if (n.kind == TokenKind::Identifier) {
            operand = n.text != "instanceof";
        } else if (is_literal_token(n)) {
            operand = true;
        } else if (n.kind == TokenKind::Punct) {
            operand = n.text == "(" || n.text == "!" || n.text == "~";
        }
        if (!operand) {
            pos_ = save;
            return false;
        }
        out = std::move(t);
        return true;
    }

    std::unique_ptr<Expr> unary() {
        std::size_t start = pos_;
        if (is("+") || is("-") || is("++") || is("--") || is("!") || is("~")) {
            auto e = make_expr(ExprKind::Unary, start);
            e->text = advance().text;
            e->args.push_back(unary());
            return end_expr(std::move(e));
        }
        if (is("(")) {
            if (lambda_ahead()) return lambda();
            TypeRef t;
            if (cast_ahead(t)) {
                auto e = make_expr(ExprKind::Cast, start);
                e->type = std::move(t);
                e->args.push_back(lambda_ahead() ? lambda() : unary());
                return end_expr(std::move(e));
            }
        }
        return postfix(primary());
    }

    std::unique_ptr<Expr> arguments_into(std::unique_ptr<Expr> e) {
        expect("(");
        bool saved = no_lambda_;
        no_lambda_ = false;
        while (!is(")")) {
            e->args.push_back(expression());
            if (is(",")) advance();
            else break;
        }
        no_lambda_ = saved;
        expect(")");
        return e;
    }

    std::unique_ptr<Expr> array_init() {
        auto e = make_expr(ExprKind::ArrayInit, pos_);
        expect("{");
        while (!is("}")) {
            e->args.push_back(is("{") ? array_init() : expression());
            if (is(",")) advance();
            else break;
        }
        expect("}");
        return end_expr(std::move(e));
    }

    std::unique_ptr<Expr> creator(std::size_t start) {
        expect("new");
        if (is("<")) skip_balanced_angles();
        skip_annotations();
        TypeRef t;
        t.line = peek().line;
        t.column = peek().column;
        if (peek().kind == TokenKind::Identifier && kPrimitives.count(peek().text)) {
            t.name = advance().text;
        } else {
            t.name = ident();
            if (is("<")) type_args(t.args);
            while (is(".")) {
                advance();
                skip_annotations();
                t.name += "." + ident();
                if (is("<")) {
                    t.args.clear();
                    type_args(t.args);
                }
            }
        }
        if (is("[")) {
            auto e = make_expr(ExprKind::NewArray, start);
            while (is("[")) {
                advance();
                if (is("]")) {
                    advance();
                    t.array_dims++;
                    continue;
                }
                e->args.push_back(expression());
                expect("]");
                t.array_dims++;
            }
            if (is("{")) {
                auto init = array_init();
                for (auto& a : init->args) e->args.push_back(std::move(a));
            }
            e->type = std::move(t);
            return end_expr(std::move(e));
        }
        auto e = make_expr(ExprKind::New, start);
        e->type = std::move(t);
        e = arguments_into(std::move(e));
        if (is("{")) {
            auto body = std::make_shared<TypeDecl>();
            body->name = e->type.name;
            body->line = peek().line;
            class_body(*body);
            e->anon_body = std::move(body);
        }
        return end_expr(std::move(e));
    }

    std::unique_ptr<Expr> primary() {
        std::size_t start = pos_;
        const Token& t = peek();
        if (is_literal_token(t)) {
            auto e = make_expr(ExprKind::Literal, start);
            e->text = advance().text;
            return end_expr(std::move(e));
        }
        if (is("(")) {
            advance();
            bool saved = no_lambda_;
            no_lambda_ = false;
            auto inner = expression();
            no_lambda_ = saved;
            expect(")");
            inner->tok_begin = start;
            inner->tok_end = pos_;
            return inner;
        }
        if (is("this")) {
            advance();
            auto e = make_expr(ExprKind::This, start);
            if (is("(")) {
                auto call = make_expr(ExprKind::Call, start);
                call->text = "this";
                return end_expr(arguments_into(std::move(call)));
            }
            return end_expr(std::move(e));
        }
        if (is("super")) {
            advance();
            auto e = make_expr(ExprKind::Super, start);
            if (is("(")) {
                auto call = make_expr(ExprKind::Call, start);
                call->text = "super";
                return end_expr(arguments_into(std::move(call)));
            }
            return end_expr(std::move(e));
        }
        if (is("new")) return creator(start);
        if (is("switch")) {
            auto e = make_expr(ExprKind::SwitchExpr, start);
            advance();
            auto sw = std::make_shared<Stmt>();
            sw->kind = StmtKind::Switch;
            sw->line = t.line;
            sw->tok_begin = start;
            sw->expr = paren_expr();
            switch_body(*sw);
            sw->tok_end = pos_;
            e->switch_stmt = std::move(sw);
            return end_expr(std::move(e));
        }
        if (t.kind == TokenKind::Identifier && (kPrimitives.count(t.text) || t.text == "void")) {
            // int.class, int[].class, int[]::new
            auto e = make_expr(ExprKind::ClassLiteral, start);
            e->type = type();
            if (is("::")) {
                advance();
                auto ref = make_expr(ExprKind::MethodRef, start);
                ref->type = e->type;
                ref->text = is("new") ? advance().text : ident();
                return end_expr(std::move(ref));
            }
            expect(".");
            expect("class");
            return end_expr(std::move(e));
        }
        if (is("@")) {  // type annotation in expression position
            skip_annotations();
            return primary();
        }
        if (is_plain_ident()) {
            // Array type class literal or method ref: Foo[].class / Foo[]::new
            if (is("[", 1) && is("]", 2)) {
                auto e = make_expr(ExprKind::ClassLiteral, start);
                e->type = type();
                if (is("::")) {
                    advance();
                    auto ref = make_expr(ExprKind::MethodRef, start);
                    ref->type = e->type;
                    ref->text = is("new") ? advance().text : ident();
                    return end_expr(std::move(ref));
                }
                expect(".");
                expect("class");
                return end_expr(std::move(e));
            }
            // Generic type method ref: List<String>::new
            if (is("<", 1)) {
                std::size_t save = pos_;
                TypeRef tr;
                if (try_type(tr) && is("::")) {
                    advance();
                    auto ref = make_expr(ExprKind::MethodRef, start);
                    ref->type = tr;
                    ref->text = is("new") ? advance().text : ident();
                    return end_expr(std::move(ref));
                }
                pos_ = save;
            }
            std::string name = advance().text;
            if (is("(")) {
                auto call = make_expr(ExprKind::Call, start);
                call->text = std::move(name);
                return end_expr(arguments_into(std::move(call)));
            }
            auto e = make_expr(ExprKind::Name, start);
            e->text = std::move(name);
            return end_expr(std::move(e));
        }
        fail("expected expression");
    }

    std::unique_ptr<Expr> postfix(std::unique_ptr<Expr> e) {
        std::size_t start = e->tok_begin;
        for (;;) {
            if (is(".")) {
                advance();
                if (is("new")) {  // inner creation: outer.new Inner()
                    auto inner = creator(pos_);
                    inner->target = std::move(e);
                    inner->tok_begin = start;
                    e = std::move(inner);
                    continue;
                }
                if (is("class")) {
                    advance();
                    auto lit = make_expr(ExprKind::ClassLiteral, start);
                    lit->type.name = dotted_name(*e);
                    lit->type.line = e->line;
                    lit->type.column = e->column;
                    e = end_expr(std::move(lit));
                    continue;
                }
                if (is("this") || is("super")) {
                    auto q = make_expr(is("this") ? ExprKind::This : ExprKind::Super, start);
                    q->text = dotted_name(*e);
                    advance();
                    e = end_expr(std::move(q));
                    continue;
                }
                if (is("<")) skip_balanced_angles();
                std::string name = ident();
                if (is("(")) {
                    auto call = make_expr(ExprKind::Call, start);
                    call->text = std::move(name);
                    call->target = std::move(e);
                    e = end_expr(arguments_into(std::move(call)));
                } else {
                    auto fa = make_expr(ExprKind::FieldAccess, start);
                    fa->text = std::move(name);
                    fa->target = std::move(e);
                    e = end_expr(std::move(fa));
                }
                continue;
            }
            if (is("[")) {
                advance();
                auto acc = make_expr(ExprKind::ArrayAccess, start);
                acc->args.push_back(std::move(e));
                acc->args.push_back(expression());
                expect("]");
                e = end_expr(std::move(acc));
                continue;
            }
            if (is("::")) {
                advance();
                auto ref = make_expr(ExprKind::MethodRef, start);
                ref->text = is("new") ? advance().text : ident();
                ref->target = std::move(e);
                e = end_expr(std::move(ref));
                continue;
            }
            if (is("++") || is("--")) {
                auto u = make_expr(ExprKind::Unary, start);
                u->text = advance().text;
                u->postfix = true;
                u->args.push_back(std::move(e));
                e = end_expr(std::move(u));
                continue;
            }
            return e;
        }
    }
};

}  // namespace

ParsedUnit parse_compilation_unit(std::string_view source) {
    ParsedUnit out;
    out.tokens = tokenize(source);
    Parser p(out.tokens);
    out.unit = p.compilation_unit();
    return out;
}

ParsedMethod parse_method(std::string_view source, int first_line) {
    ParsedMethod out;
    out.tokens = tokenize(source, first_line);
    Parser p(out.tokens);
    out.method = p.lone_method();
    return out;
}

ParsedStatements parse_statements(std::string_view source, int first_line) {
    ParsedStatements out;
    out.tokens = tokenize(source, first_line);
    Parser p(out.tokens);
    out.statements = p.statements_until_end();
    return out;
}

// ---- traversal ------------------------------------------------------------------

namespace {

void walk_type_decl(const TypeDecl& decl, const StmtVisitor& on_stmt, const ExprVisitor& on_expr) {
    for (const auto& f : decl.fields)
        for (const auto& v : f.vars)
            if (v.init) walk_expr(*v.init, on_expr, on_stmt, true);
    for (const auto& m : decl.methods)
        if (m.body) walk_stmt(*m.body, on_stmt, on_expr, true);
}

}  // namespace

void walk_expr(const Expr& expr, const ExprVisitor& on_expr, const StmtVisitor& on_stmt, bool into_anonymous) {
    if (on_expr) on_expr(expr);
    if (expr.target) walk_expr(*expr.target, on_expr, on_stmt, into_anonymous);
    for (const auto& a : expr.args) walk_expr(*a, on_expr, on_stmt, into_anonymous);
    if (expr.lambda_block) walk_stmt(*expr.lambda_block, on_stmt, on_expr, into_anonymous);
    if (expr.switch_stmt) walk_stmt(*expr.switch_stmt, on_stmt, on_expr, into_anonymous);
    if (into_anonymous && expr.anon_body) walk_type_decl(*expr.anon_body, on_stmt, on_expr);
}

void walk_stmt(const Stmt& stmt, const StmtVisitor& on_stmt, const ExprVisitor& on_expr, bool into_anonymous) {
    if (on_stmt) on_stmt(stmt);
    auto ex = [&](const std::unique_ptr<Expr>& e) {
        if (e) walk_expr(*e, on_expr, on_stmt, into_anonymous);
    };
    auto st = [&](const std::unique_ptr<Stmt>& s) {
        if (s) walk_stmt(*s, on_stmt, on_expr, into_anonymous);
    };
    // Init statements / resources come before the condition in evaluation order.
    for (const auto& c : stmt.children) st(c);
    for (const auto& v : stmt.vars) ex(v.init);
    ex(stmt.expr);
    st(stmt.then_branch);
    st(stmt.else_branch);
    st(stmt.body);
    for (const auto& u : stmt.updates) ex(u);
    for (const auto& c : stmt.cases) {
        for (const auto& l : c.labels) ex(l);
        for (const auto& b : c.body) st(b);
    }
    for (const auto& c : stmt.catches) st(c.body);
    st(stmt.finally_block);
    if (into_anonymous && stmt.local_class) walk_type_decl(*stmt.local_class, on_stmt, on_expr);
}

std::string dotted_name(const Expr& expr) {
    if (expr.kind == ExprKind::Name) return expr.text;
    if (expr.kind == ExprKind::FieldAccess && expr.target) {
        std::string base = dotted_name(*expr.target);
        if (base.empty()) return {};
        return base + "." + expr.text;
    }
    return {};
}

std::vector<const Stmt*> flatten_statements(const Stmt& root) {
    std::vector<const Stmt*> out;
    walk_stmt(root, [&](const Stmt& s) {
        if (s.kind != StmtKind::Block) out.push_back(&s);
    });
    return out;
}

}  // namespace mockless::java
