#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace llmsec {

struct Location {
    std::string file;
    int line = 0;

    friend bool operator==(const Location&, const Location&) = default;
};

// One call expression inside a function body, as written.
struct CallSiteRecord {
    std::string caller_qname;
    std::string callee_expr;  // dotted path, e.g. "os.popen", "self._run"
    int arg_count = 0;
    Location location;
    // Callee expressions of calls syntactically nested in this call's
    // argument list (one level of nesting tracked).
    std::vector<std::string> arg_callees;
    // Bare names appearing in the argument list; resolved later against
    // constructor aliases for composition-style implicit invocation.
    std::vector<std::string> arg_name_refs;
};

struct FunctionRecord {
    std::string qname;  // module.Class.method or module.func
    std::vector<std::string> params;
    std::optional<std::string> enclosing_class;
    bool is_public = false;  // no leading underscore on any qname segment
    std::vector<CallSiteRecord> call_sites;
    Location location;
    // Local "name = SomeClass(...)" bindings; name -> callee exprs seen.
    std::map<std::string, std::vector<std::string>> ctor_aliases;
};

struct ClassRecord {
    std::string qname;
    std::vector<std::string> base_names;  // as written, unresolved
    std::map<std::string, std::string> methods;  // method name -> fn qname
    std::vector<std::pair<std::string, Location>> instantiation_sites;
    Location location;
};

struct ImportBinding {
    std::string unit;         // module_name of the importing unit
    std::string local_alias;  // identifier bound in that unit
    std::string target;       // fully qualified imported symbol
};

struct SourceUnit {
    std::string path;
    std::string module_name;
    std::string text;
    bool syntax_ok = true;
};

// Everything extracted from one file. `unit.syntax_ok == false` means the
// structural parse failed; the unit then contributes tokens only.
struct ParsedUnit {
    SourceUnit unit;
    std::vector<FunctionRecord> functions;
    std::vector<ClassRecord> classes;
    std::vector<ImportBinding> imports;
};

struct ProgramIndex {
    std::map<std::string, SourceUnit> units;  // path -> unit
    std::map<std::string, FunctionRecord> functions;
    std::map<std::string, ClassRecord> classes;
    std::map<std::string, std::vector<ImportBinding>> imports;  // by module
    std::map<std::string, std::set<std::string>> token_index;   // token -> paths
    std::map<std::string, std::string> module_paths;  // module_name -> path
};

class IndexError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Module name from a path relative to the scan root: strip the source
// suffix, turn separators into dots, collapse package __init__ files.
std::string module_name_from_path(std::string_view rel_path);

// Parse a single unit. Never throws; a failed parse comes back with
// syntax_ok=false and no definitions.
ParsedUnit parse_unit(const std::string& path, std::string_view text);

// Assemble an index from in-memory (path, text) pairs. Paths are
// processed in sorted order so the result is deterministic.
ProgramIndex build_index(std::vector<std::pair<std::string, std::string>> files);

// Index every source file under root_dir, honoring ignore globs
// (fnmatch-style, matched against the root-relative path).
ProgramIndex index_package(const std::string& root_dir,
                           const std::vector<std::string>& ignore_globs = {});

// Identifier-boundary token lookup; over-approximates the set of files
// whose code mentions `token`.
std::set<std::string> token_search(const ProgramIndex& index,
                                   std::string_view token);

// Final dotted segment of an expression or qualified name.
std::string_view final_segment(std::string_view dotted);

// Resolve a callee expression to a class qname when it names one (local
// class, imported class, or dotted module path), else nullopt.
std::optional<std::string> resolve_class_reference(const std::string& expr,
                                                   const std::string& module,
                                                   const ProgramIndex& index);

// Module name of the unit that defines `fn`, empty when unknown.
std::string module_of(const FunctionRecord& fn, const ProgramIndex& index);

// True when no dot-separated segment starts with an underscore.
bool qname_is_public(std::string_view qname);

// fnmatch-style glob ( * ? and character classes are not needed here;
// * and ? only) used for the ignore list.
bool glob_match(std::string_view pattern, std::string_view text);

namespace pysrc {

enum class TokKind { Name, Number, String, Op, Newline, Indent, Dedent, End };

struct Tok {
    TokKind kind;
    std::string text;
    int line = 0;
};

// Tolerant tokenizer: always produces a stream, never throws. Strings
// and comments are consumed but not tokenized inside.
std::vector<Tok> lex(std::string_view text);

// All identifier-shaped tokens of a text, for the token index. Works on
// files that fail the structural parse as well.
std::set<std::string> identifier_tokens(std::string_view text);

}  // namespace pysrc

}  // namespace llmsec
