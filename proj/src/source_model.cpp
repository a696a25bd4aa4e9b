#include "llmsec/source_model.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace fs = std::filesystem;

namespace llmsec {

namespace {

const std::unordered_set<std::string>& keywords() {
    static const std::unordered_set<std::string> kw = {
        "False",  "None",     "True",  "and",    "as",     "assert", "async",
        "await",  "break",    "class", "continue", "def",  "del",    "elif",
        "else",   "except",   "finally", "for",  "from",   "global", "if",
        "import", "in",       "is",    "lambda", "nonlocal", "not",  "or",
        "pass",   "raise",    "return", "try",   "while",  "with",   "yield"};
    return kw;
}

bool is_ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
bool is_ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

}  // namespace

std::string_view final_segment(std::string_view dotted) {
    const auto pos = dotted.rfind('.');
    return pos == std::string_view::npos ? dotted : dotted.substr(pos + 1);
}

bool qname_is_public(std::string_view qname) {
    size_t start = 0;
    while (start <= qname.size()) {
        const auto dot = qname.find('.', start);
        const auto seg = qname.substr(
            start, dot == std::string_view::npos ? qname.size() - start
                                                 : dot - start);
        if (!seg.empty() && seg.front() == '_') return false;
        if (dot == std::string_view::npos) break;
        start = dot + 1;
    }
    return true;
}

bool glob_match(std::string_view pattern, std::string_view text) {
    if (pattern.empty()) return text.empty();
    if (pattern.front() == '*') {
        for (size_t i = 0; i <= text.size(); ++i) {
            if (glob_match(pattern.substr(1), text.substr(i))) return true;
        }
        return false;
    }
    if (text.empty()) return false;
    if (pattern.front() == '?' || pattern.front() == text.front())
        return glob_match(pattern.substr(1), text.substr(1));
    return false;
}

std::string module_name_from_path(std::string_view rel_path) {
    std::string p(rel_path);
    std::replace(p.begin(), p.end(), '\\', '/');
    const auto dot = p.rfind('.');
    if (dot != std::string::npos) p.resize(dot);
    if (p.size() >= 9 && p.compare(p.size() - 9, 9, "/__init__") == 0)
        p.resize(p.size() - 9);
    else if (p == "__init__")
        p.clear();
    std::replace(p.begin(), p.end(), '/', '.');
    return p;
}

namespace pysrc {

namespace {

struct Lexer {
    std::string_view src;
    size_t pos = 0;
    int line = 1;
    int bracket_depth = 0;
    std::vector<int> indents{0};
    std::vector<Tok> out;
    bool ok = true;
    bool at_line_start = true;

    char peek(size_t ahead = 0) const {
        return pos + ahead < src.size() ? src[pos + ahead] : '\0';
    }

    void push(TokKind k, std::string text) {
        out.push_back(Tok{k, std::move(text), line});
    }

    void handle_indent() {
        // Measure leading whitespace of the upcoming logical line.
        while (true) {
            int col = 0;
            const size_t mark = pos;
            while (pos < src.size()) {
                if (src[pos] == ' ') {
                    ++col;
                    ++pos;
                } else if (src[pos] == '\t') {
                    col += 8 - (col % 8);
                    ++pos;
                } else {
                    break;
                }
            }
            if (pos >= src.size()) return;
            if (src[pos] == '\n') {  // blank line
                ++pos;
                ++line;
                continue;
            }
            if (src[pos] == '\r') {
                ++pos;
                continue;
            }
            if (src[pos] == '#') {  // comment-only line
                while (pos < src.size() && src[pos] != '\n') ++pos;
                continue;
            }
            (void)mark;
            if (col > indents.back()) {
                indents.push_back(col);
                push(TokKind::Indent, "");
            } else if (col < indents.back()) {
                while (indents.size() > 1 && indents.back() > col) {
                    indents.pop_back();
                    push(TokKind::Dedent, "");
                }
                if (indents.back() != col) ok = false;  // inconsistent dedent
            }
            return;
        }
    }

    void lex_string() {
        const char quote = src[pos];
        bool raw = false;
        // prefix letters were consumed by the caller; it passes raw-ness
        // via this flag when needed. Re-detect here from lookbehind is
        // avoided by caller-side handling.
        (void)raw;
        bool triple = peek(1) == quote && peek(2) == quote;
        const int start_line = line;
        pos += triple ? 3 : 1;
        while (pos < src.size()) {
            const char c = src[pos];
            if (c == '\\' && pos + 1 < src.size()) {
                if (src[pos + 1] == '\n') ++line;
                pos += 2;
                continue;
            }
            if (c == '\n') {
                if (!triple) break;  // unterminated single-line string
                ++line;
                ++pos;
                continue;
            }
            if (c == quote) {
                if (!triple) {
                    ++pos;
                    out.push_back(Tok{TokKind::String, "", start_line});
                    return;
                }
                if (peek(1) == quote && peek(2) == quote) {
                    pos += 3;
                    out.push_back(Tok{TokKind::String, "", start_line});
                    return;
                }
            }
            ++pos;
        }
        out.push_back(Tok{TokKind::String, "", start_line});
    }

    void run() {
        while (pos < src.size()) {
            if (at_line_start && bracket_depth == 0) {
                at_line_start = false;
                handle_indent();
                if (pos >= src.size()) break;
            }
            const char c = src[pos];
            if (c == '#') {
                while (pos < src.size() && src[pos] != '\n') ++pos;
                continue;
            }
            if (c == '\n') {
                ++pos;
                ++line;
                if (bracket_depth == 0) {
                    if (!out.empty() && out.back().kind != TokKind::Newline &&
                        out.back().kind != TokKind::Indent &&
                        out.back().kind != TokKind::Dedent)
                        push(TokKind::Newline, "");
                    at_line_start = true;
                }
                continue;
            }
            if (c == '\\' && peek(1) == '\n') {
                pos += 2;
                ++line;
                continue;
            }
            if (c == ' ' || c == '\t' || c == '\r' || c == '\f') {
                ++pos;
                continue;
            }
            if (c == '\'' || c == '"') {
                lex_string();
                continue;
            }
            if (is_ident_start(c)) {
                const size_t start = pos;
                while (pos < src.size() && is_ident_char(src[pos])) ++pos;
                std::string word(src.substr(start, pos - start));
                // string prefixes: r"...", b'...', f"...", rb"..." etc.
                if (word.size() <= 2 && pos < src.size() &&
                    (src[pos] == '"' || src[pos] == '\'')) {
                    std::string low = word;
                    std::transform(low.begin(), low.end(), low.begin(),
                                   [](unsigned char ch) { return std::tolower(ch); });
                    if (low.find_first_not_of("rbfu") == std::string::npos) {
                        lex_string();
                        continue;
                    }
                }
                push(TokKind::Name, std::move(word));
                continue;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) ||
                (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
                const size_t start = pos;
                while (pos < src.size() &&
                       (is_ident_char(src[pos]) || src[pos] == '.')) {
                    ++pos;
                }
                push(TokKind::Number, std::string(src.substr(start, pos - start)));
                continue;
            }
            // operators; multi-char forms are folded so '=' alone means
            // assignment downstream
            {
                static const char* two_char[] = {
                    "**", "//", "==", "!=", "<=", ">=", "->", ":=", "+=",
                    "-=", "*=", "/=", "%=", "&=", "|=", "^=", ">>", "<<"};
                std::string op(1, c);
                for (const char* t : two_char) {
                    if (c == t[0] && peek(1) == t[1]) {
                        op = t;
                        break;
                    }
                }
                if (op == "**" && peek(2) == '=') op = "**=";
                if (op == "//" && peek(2) == '=') op = "//=";
                if (op == ">>" && peek(2) == '=') op = ">>=";
                if (op == "<<" && peek(2) == '=') op = "<<=";
                pos += op.size();
                if (op == "(" || op == "[" || op == "{") ++bracket_depth;
                if (op == ")" || op == "]" || op == "}") {
                    if (bracket_depth > 0)
                        --bracket_depth;
                    else
                        ok = false;
                }
                push(TokKind::Op, std::move(op));
                continue;
            }
        }
        if (bracket_depth != 0) ok = false;
        if (!out.empty() && out.back().kind != TokKind::Newline)
            push(TokKind::Newline, "");
        while (indents.size() > 1) {
            indents.pop_back();
            push(TokKind::Dedent, "");
        }
        push(TokKind::End, "");
    }
};

}  // namespace

std::vector<Tok> lex(std::string_view text) {
    Lexer lx{text};
    lx.run();
    return lx.out;
}

std::set<std::string> identifier_tokens(std::string_view text) {
    // Independent of the structural parse: a raw scan that skips strings
    // and comments, so broken files still feed the token index.
    std::set<std::string> out;
    size_t pos = 0;
    while (pos < text.size()) {
        const char c = text[pos];
        if (c == '#') {
            while (pos < text.size() && text[pos] != '\n') ++pos;
            continue;
        }
        if (c == '\'' || c == '"') {
            const char quote = c;
            const bool triple = pos + 2 < text.size() &&
                                text[pos + 1] == quote && text[pos + 2] == quote;
            pos += triple ? 3 : 1;
            while (pos < text.size()) {
                if (text[pos] == '\\') {
                    pos += 2;
                    continue;
                }
                if (!triple && (text[pos] == quote || text[pos] == '\n')) {
                    ++pos;
                    break;
                }
                if (triple && text[pos] == quote && pos + 2 < text.size() &&
                    text[pos + 1] == quote && text[pos + 2] == quote) {
                    pos += 3;
                    break;
                }
                ++pos;
            }
            continue;
        }
        if (is_ident_start(c)) {
            const size_t start = pos;
            while (pos < text.size() && is_ident_char(text[pos])) ++pos;
            out.emplace(text.substr(start, pos - start));
            continue;
        }
        ++pos;
    }
    return out;
}

}  // namespace pysrc

namespace {

using pysrc::Tok;
using pysrc::TokKind;

struct ScopeFrame {
    enum class Kind { Module, Class, Function } kind;
    std::string qname;       // qualified name of this scope
    int body_depth = 0;      // indent depth of the scope body
    int fn_index = -1;       // index into ParsedUnit::functions
    int class_index = -1;    // index into ParsedUnit::classes
};

struct UnitParser {
    const std::string& path;
    std::string module;
    bool is_package = false;
    std::vector<Tok> toks;
    size_t ti = 0;
    int depth = 0;
    bool failed = false;
    ParsedUnit out;
    std::vector<ScopeFrame> scopes;

    const Tok& cur() const { return toks[ti]; }
    bool at(TokKind k) const { return toks[ti].kind == k; }
    bool at_op(const char* t) const {
        return toks[ti].kind == TokKind::Op && toks[ti].text == t;
    }
    bool at_name(const char* t) const {
        return toks[ti].kind == TokKind::Name && toks[ti].text == t;
    }
    void advance() {
        if (toks[ti].kind != TokKind::End) ++ti;
    }

    void fail() { failed = true; }

    ScopeFrame* innermost_function() {
        for (auto it = scopes.rbegin(); it != scopes.rend(); ++it)
            if (it->kind == ScopeFrame::Kind::Function) return &*it;
        return nullptr;
    }

    FunctionRecord* current_function() {
        ScopeFrame* f = innermost_function();
        return f ? &out.functions[static_cast<size_t>(f->fn_index)] : nullptr;
    }

    std::string scope_prefix() const {
        return scopes.empty() ? module : scopes.back().qname;
    }

    std::string qualify(const std::string& name) const {
        const std::string prefix = scope_prefix();
        return prefix.empty() ? name : prefix + "." + name;
    }

    void skip_to_newline() {
        while (!at(TokKind::Newline) && !at(TokKind::End)) advance();
        if (at(TokKind::Newline)) advance();
    }

    // Reads NAME (. NAME)* starting at the cursor; empty on no match.
    std::string read_dotted() {
        if (!at(TokKind::Name)) return {};
        std::string dotted = cur().text;
        advance();
        while (at_op(".")) {
            if (toks[ti + 1].kind == TokKind::Name) {
                dotted += '.';
                dotted += toks[ti + 1].text;
                ti += 2;
            } else {
                break;
            }
        }
        return dotted;
    }

    void parse_import() {
        advance();  // 'import'
        while (!at(TokKind::Newline) && !at(TokKind::End)) {
            std::string dotted = read_dotted();
            if (dotted.empty()) {
                skip_to_newline();
                return;
            }
            std::string alias;
            if (at_name("as")) {
                advance();
                if (at(TokKind::Name)) {
                    alias = cur().text;
                    advance();
                }
            }
            if (alias.empty()) {
                const auto first_dot = dotted.find('.');
                const std::string head = first_dot == std::string::npos
                                             ? dotted
                                             : dotted.substr(0, first_dot);
                out.imports.push_back({module, head, head});
            } else {
                out.imports.push_back({module, alias, dotted});
            }
            if (at_op(","))
                advance();
            else
                break;
        }
        skip_to_newline();
    }

    void parse_from_import() {
        advance();  // 'from'
        int level = 0;
        while (at_op(".")) {
            ++level;
            advance();
        }
        std::string base = read_dotted();
        if (level > 0) {
            std::vector<std::string> segs;
            {
                std::stringstream ss(module);
                std::string seg;
                while (std::getline(ss, seg, '.'))
                    if (!seg.empty()) segs.push_back(seg);
            }
            const int drop = is_package ? level - 1 : level;
            if (drop > static_cast<int>(segs.size())) {
                skip_to_newline();
                return;
            }
            std::string prefix;
            for (size_t i = 0; i + static_cast<size_t>(drop) < segs.size(); ++i) {
                if (!prefix.empty()) prefix += '.';
                prefix += segs[i];
            }
            if (base.empty())
                base = prefix;
            else if (!prefix.empty())
                base = prefix + "." + base;
        }
        if (!at_name("import")) {
            skip_to_newline();
            return;
        }
        advance();
        const bool parens = at_op("(");
        if (parens) advance();
        while (!at(TokKind::Newline) && !at(TokKind::End)) {
            if (at_op("*")) {
                advance();
                continue;
            }
            if (at_op(")")) {
                advance();
                continue;
            }
            if (!at(TokKind::Name)) {
                advance();
                continue;
            }
            const std::string sym = cur().text;
            advance();
            std::string alias = sym;
            if (at_name("as")) {
                advance();
                if (at(TokKind::Name)) {
                    alias = cur().text;
                    advance();
                }
            }
            const std::string target = base.empty() ? sym : base + "." + sym;
            out.imports.push_back({module, alias, target});
            if (at_op(",")) advance();
        }
        skip_to_newline();
    }

    void parse_class() {
        const int header_line = cur().line;
        advance();  // 'class'
        if (!at(TokKind::Name)) {
            fail();
            skip_to_newline();
            return;
        }
        ClassRecord rec;
        const std::string name = cur().text;
        advance();
        rec.qname = qualify(name);
        rec.location = {path, header_line};
        if (at_op("(")) {
            advance();
            int d = 1;
            while (d > 0 && !at(TokKind::End)) {
                if (at_op("(") || at_op("[") || at_op("{")) {
                    ++d;
                    advance();
                    continue;
                }
                if (at_op(")") || at_op("]") || at_op("}")) {
                    --d;
                    advance();
                    continue;
                }
                if (d == 1 && at(TokKind::Name) && !keywords().count(cur().text)) {
                    std::string base = read_dotted();
                    if (at_op("=")) {
                        // keyword argument (metaclass=...); not a base
                        advance();
                        continue;
                    }
                    rec.base_names.push_back(base);
                    continue;
                }
                advance();
            }
        }
        if (!at_op(":")) {
            fail();
            skip_to_newline();
            return;
        }
        advance();
        const int class_index = static_cast<int>(out.classes.size());
        out.classes.push_back(std::move(rec));
        if (at(TokKind::Newline)) {
            advance();
            if (at(TokKind::Indent)) {
                advance();
                ++depth;
                scopes.push_back({ScopeFrame::Kind::Class,
                                  out.classes[class_index].qname, depth, -1,
                                  class_index});
            }
            // empty suite on the next line would be an indent error which
            // the dedent bookkeeping reports
        } else {
            skip_to_newline();  // one-liner class body: nothing to record
        }
    }

    void parse_def() {
        const int header_line = cur().line;
        advance();  // 'def'
        if (!at(TokKind::Name)) {
            fail();
            skip_to_newline();
            return;
        }
        FunctionRecord rec;
        const std::string name = cur().text;
        advance();
        rec.qname = qualify(name);
        rec.is_public = qname_is_public(rec.qname);
        rec.location = {path, header_line};
        if (!scopes.empty() && scopes.back().kind == ScopeFrame::Kind::Class) {
            rec.enclosing_class = scopes.back().qname;
        }

        if (!at_op("(")) {
            fail();
            skip_to_newline();
            return;
        }
        advance();
        int d = 1;
        bool expecting_param = true;
        while (d > 0) {
            if (at(TokKind::End) || at(TokKind::Newline)) {
                fail();  // header ran off the line: malformed
                skip_to_newline();
                return;
            }
            if (at_op("(") || at_op("[") || at_op("{")) {
                ++d;
                advance();
                continue;
            }
            if (at_op(")") || at_op("]") || at_op("}")) {
                --d;
                advance();
                continue;
            }
            if (d == 1) {
                if (expecting_param) {
                    if (at_op("*") || at_op("**") || at_op("/")) {
                        advance();
                        continue;
                    }
                    if (at(TokKind::Name)) {
                        const std::string pname = cur().text;
                        if (std::find(rec.params.begin(), rec.params.end(),
                                      pname) != rec.params.end()) {
                            fail();
                            skip_to_newline();
                            return;
                        }
                        rec.params.push_back(pname);
                        advance();
                        expecting_param = false;
                        continue;
                    }
                    fail();
                    skip_to_newline();
                    return;
                }
                if (at_op(",")) {
                    expecting_param = true;
                    advance();
                    continue;
                }
            }
            advance();  // annotations, defaults, nested structure
        }
        // optional return annotation up to the colon
        while (!at_op(":")) {
            if (at(TokKind::End) || at(TokKind::Newline)) {
                fail();
                skip_to_newline();
                return;
            }
            advance();
        }
        advance();  // ':'

        const int fn_index = static_cast<int>(out.functions.size());
        if (!scopes.empty() && scopes.back().kind == ScopeFrame::Kind::Class) {
            out.classes[static_cast<size_t>(scopes.back().class_index)]
                .methods[name] = rec.qname;
        }
        out.functions.push_back(std::move(rec));

        if (at(TokKind::Newline)) {
            advance();
            if (at(TokKind::Indent)) {
                advance();
                ++depth;
                scopes.push_back({ScopeFrame::Kind::Function,
                                  out.functions[fn_index].qname, depth,
                                  fn_index, -1});
            }
        } else {
            // inline body: `def f(): pass` — scan the remainder as the body
            scopes.push_back({ScopeFrame::Kind::Function,
                              out.functions[fn_index].qname, depth, fn_index,
                              -1});
            parse_body_statement();
            scopes.pop_back();
        }
    }

    // Scans one logical line inside a function for call sites, nested
    // argument calls and ctor-alias assignments.
    void parse_body_statement() {
        FunctionRecord* fn = current_function();
        if (fn == nullptr) {
            skip_to_newline();
            return;
        }

        std::string assign_target;
        if (at(TokKind::Name) && !keywords().count(cur().text) &&
            toks[ti + 1].kind == TokKind::Op && toks[ti + 1].text == "=") {
            assign_target = cur().text;
            ti += 2;
        }

        struct Frame {
            std::string callee;
            int line = 0;
            int open_depth = 0;
            int args = 0;
            bool seg_has_tokens = false;
            std::vector<std::string> arg_callees;
            std::vector<std::string> arg_name_refs;
        };
        std::vector<Frame> frames;
        int bdepth = 0;

        auto note_token_in_segment = [&]() {
            if (!frames.empty()) frames.back().seg_has_tokens = true;
        };

        while (!at(TokKind::Newline) && !at(TokKind::End)) {
            if (at(TokKind::Name) && !keywords().count(cur().text)) {
                const int line0 = cur().line;
                std::string chain = read_dotted();
                if (at_op("(")) {
                    if (!frames.empty()) {
                        frames.back().arg_callees.push_back(chain);
                        frames.back().seg_has_tokens = true;
                    }
                    if (!assign_target.empty())
                        fn->ctor_aliases[assign_target].push_back(chain);
                    advance();  // '('
                    ++bdepth;
                    frames.push_back(Frame{chain, line0, bdepth, 0, false, {}, {}});
                } else {
                    if (!frames.empty() && chain.find('.') == std::string::npos)
                        frames.back().arg_name_refs.push_back(chain);
                    note_token_in_segment();
                }
                continue;
            }
            if (at_op("(") || at_op("[") || at_op("{")) {
                ++bdepth;
                if (!at_op("(")) note_token_in_segment();
                advance();
                continue;
            }
            if (at_op(")") || at_op("]") || at_op("}")) {
                if (!frames.empty() && at_op(")") &&
                    frames.back().open_depth == bdepth) {
                    Frame f = std::move(frames.back());
                    frames.pop_back();
                    if (f.seg_has_tokens) ++f.args;
                    CallSiteRecord cs;
                    cs.caller_qname = fn->qname;
                    cs.callee_expr = std::move(f.callee);
                    cs.arg_count = f.args;
                    cs.location = {path, f.line};
                    cs.arg_callees = std::move(f.arg_callees);
                    cs.arg_name_refs = std::move(f.arg_name_refs);
                    fn->call_sites.push_back(std::move(cs));
                    if (!frames.empty()) frames.back().seg_has_tokens = true;
                }
                --bdepth;
                if (bdepth < 0) {
                    fail();
                    skip_to_newline();
                    return;
                }
                advance();
                continue;
            }
            if (at_op(",")) {
                if (!frames.empty() && frames.back().open_depth == bdepth) {
                    if (frames.back().seg_has_tokens) {
                        ++frames.back().args;
                        frames.back().seg_has_tokens = false;
                    }
                } else {
                    note_token_in_segment();
                }
                advance();
                continue;
            }
            if (at(TokKind::Number) || at(TokKind::String) ||
                at(TokKind::Name) || at(TokKind::Op)) {
                note_token_in_segment();
                advance();
                continue;
            }
            advance();
        }
        if (!frames.empty()) fail();  // unterminated call on this line
        if (at(TokKind::Newline)) advance();
    }

    void run() {
        while (!at(TokKind::End) && !failed) {
            if (at(TokKind::Newline)) {
                advance();
                continue;
            }
            if (at(TokKind::Indent)) {
                // unexpected block (e.g. after if/for); track depth only
                ++depth;
                advance();
                continue;
            }
            if (at(TokKind::Dedent)) {
                --depth;
                if (depth < 0) depth = 0;
                while (!scopes.empty() && scopes.back().body_depth > depth)
                    scopes.pop_back();
                advance();
                continue;
            }
            if (at_op("@")) {  // decorator line
                skip_to_newline();
                continue;
            }
            if (at_name("import")) {
                parse_import();
                continue;
            }
            if (at_name("from")) {
                parse_from_import();
                continue;
            }
            if (at_name("class")) {
                parse_class();
                continue;
            }
            if (at_name("async") && toks[ti + 1].kind == TokKind::Name &&
                toks[ti + 1].text == "def") {
                advance();
                parse_def();
                continue;
            }
            if (at_name("def")) {
                parse_def();
                continue;
            }
            if (innermost_function() != nullptr) {
                parse_body_statement();
                continue;
            }
            skip_to_newline();  // module/class level statement
        }
    }
};

}  // namespace

ParsedUnit parse_unit(const std::string& path, std::string_view text) {
    ParsedUnit result;
    result.unit.path = path;
    result.unit.text = std::string(text);
    result.unit.module_name = module_name_from_path(path);

    const std::string norm(path);
    const bool is_pkg = norm.size() >= 11 &&
                        norm.compare(norm.size() - 11, 11, "__init__.py") == 0;

    pysrc::Lexer lx{text};
    lx.run();

    UnitParser parser{path, result.unit.module_name, is_pkg, std::move(lx.out)};
    parser.out.unit = result.unit;
    parser.run();

    if (!lx.ok || parser.failed) {
        // tokens-only unit: drop definitions so graphs never see it
        ParsedUnit broken;
        broken.unit = result.unit;
        broken.unit.syntax_ok = false;
        return broken;
    }
    parser.out.unit.syntax_ok = true;
    return parser.out;
}

std::string module_of(const FunctionRecord& fn, const ProgramIndex& index) {
    const auto it = index.units.find(fn.location.file);
    return it == index.units.end() ? std::string{} : it->second.module_name;
}

std::optional<std::string> resolve_class_reference(const std::string& expr,
                                                   const std::string& module,
                                                   const ProgramIndex& index) {
    const auto find_binding =
        [&](const std::string& alias) -> const ImportBinding* {
        const auto it = index.imports.find(module);
        if (it == index.imports.end()) return nullptr;
        for (const auto& b : it->second)
            if (b.local_alias == alias) return &b;
        return nullptr;
    };

    const auto dot = expr.find('.');
    if (dot == std::string::npos) {
        const std::string local = module.empty() ? expr : module + "." + expr;
        if (index.classes.count(local)) return local;
        if (const ImportBinding* b = find_binding(expr)) {
            if (index.classes.count(b->target)) return b->target;
        }
        return std::nullopt;
    }
    const std::string head = expr.substr(0, dot);
    const std::string rest = expr.substr(dot + 1);
    if (const ImportBinding* b = find_binding(head)) {
        const std::string cand = b->target + "." + rest;
        if (index.classes.count(cand)) return cand;
    }
    if (index.classes.count(expr)) return expr;
    return std::nullopt;
}

ProgramIndex build_index(std::vector<std::pair<std::string, std::string>> files) {
    std::sort(files.begin(), files.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    ProgramIndex index;
    std::vector<ParsedUnit> parsed;
    parsed.reserve(files.size());
    for (auto& [path, text] : files) {
        ParsedUnit pu = parse_unit(path, text);
        for (const std::string& tok : pysrc::identifier_tokens(text))
            index.token_index[tok].insert(path);
        if (pu.unit.syntax_ok &&
            index.module_paths.count(pu.unit.module_name)) {
            // duplicate module name: keep the first, index the rest as
            // tokens only
            pu.functions.clear();
            pu.classes.clear();
            pu.imports.clear();
        } else if (pu.unit.syntax_ok) {
            index.module_paths[pu.unit.module_name] = path;
        }
        index.units[path] = pu.unit;
        parsed.push_back(std::move(pu));
    }

    for (ParsedUnit& pu : parsed) {
        for (FunctionRecord& fn : pu.functions)
            index.functions[fn.qname] = std::move(fn);
        for (ClassRecord& cls : pu.classes)
            index.classes[cls.qname] = std::move(cls);
        if (!pu.imports.empty()) {
            auto& dst = index.imports[pu.unit.module_name];
            dst.insert(dst.end(), pu.imports.begin(), pu.imports.end());
        }
    }

    // Cross-reference instantiation sites now that all classes are known.
    for (auto& [qname, fn] : index.functions) {
        const std::string module = module_of(fn, index);
        for (const CallSiteRecord& cs : fn.call_sites) {
            if (auto cls = resolve_class_reference(cs.callee_expr, module, index)) {
                index.classes[*cls].instantiation_sites.emplace_back(
                    fn.qname, cs.location);
            }
        }
    }
    return index;
}

ProgramIndex index_package(const std::string& root_dir,
                           const std::vector<std::string>& ignore_globs) {
    const fs::path root(root_dir);
    if (!fs::exists(root) || !fs::is_directory(root))
        throw IndexError("root directory not found: " + root_dir);

    std::vector<std::pair<std::string, std::string>> files;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        if (entry.path().extension() != ".py") continue;
        std::string rel = fs::relative(entry.path(), root).generic_string();
        bool ignored = false;
        for (const std::string& g : ignore_globs) {
            if (glob_match(g, rel)) {
                ignored = true;
                break;
            }
        }
        if (ignored) continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        files.emplace_back(std::move(rel), ss.str());
    }
    if (files.empty())
        throw IndexError("no source files under " + root_dir);
    return build_index(std::move(files));
}

std::set<std::string> token_search(const ProgramIndex& index,
                                   std::string_view token) {
    const auto it = index.token_index.find(std::string(token));
    if (it == index.token_index.end()) return {};
    return it->second;
}

}  // namespace llmsec
