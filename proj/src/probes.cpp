#include "llmsec/probes.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

namespace llmsec::probes {

namespace {

constexpr std::array<uint32_t, 64> kSha256K = {
    0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1,
    0x923f82a4, 0xab1c5ed5, 0xd807aa98, 0x12835b01, 0x243185be, 0x550c7dc3,
    0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786,
    0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da,
    0x983e5152, 0xa831c66d, 0xb00327c8, 0xbf597fc7, 0xc6e00bf3, 0xd5a79147,
    0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13,
    0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b,
    0xc24b8b70, 0xc76c51a3, 0xd192e819, 0xd6990624, 0xf40e3585, 0x106aa070,
    0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a,
    0x5b9cca4f, 0x682e6ff3, 0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208,
    0x90befffa, 0xa4506ceb, 0xbef9a3f7, 0xc67178f2};

inline uint32_t rotr(uint32_t x, int n) { return (x >> n) | (x << (32 - n)); }

constexpr std::string_view kBase85Alphabet =
    "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ"
    "abcdefghijklmnopqrstuvwxyz!#$%&()*+-;<=>?@^_`{|}~";

}  // namespace

std::string sha256_hex(std::string_view data) {
    std::array<uint32_t, 8> h = {0x6a09e667, 0xbb67ae85, 0x3c6ef372,
                                 0xa54ff53a, 0x510e527f, 0x9b05688c,
                                 0x1f83d9ab, 0x5be0cd19};

    std::vector<uint8_t> msg(data.begin(), data.end());
    const uint64_t bit_len = static_cast<uint64_t>(msg.size()) * 8;
    msg.push_back(0x80);
    while (msg.size() % 64 != 56) msg.push_back(0x00);
    for (int i = 7; i >= 0; --i)
        msg.push_back(static_cast<uint8_t>((bit_len >> (8 * i)) & 0xff));

    std::array<uint32_t, 64> w{};
    for (size_t block = 0; block < msg.size(); block += 64) {
        for (int t = 0; t < 16; ++t) {
            w[t] = (static_cast<uint32_t>(msg[block + 4 * t]) << 24) |
                   (static_cast<uint32_t>(msg[block + 4 * t + 1]) << 16) |
                   (static_cast<uint32_t>(msg[block + 4 * t + 2]) << 8) |
                   static_cast<uint32_t>(msg[block + 4 * t + 3]);
        }
        for (int t = 16; t < 64; ++t) {
            const uint32_t s0 =
                rotr(w[t - 15], 7) ^ rotr(w[t - 15], 18) ^ (w[t - 15] >> 3);
            const uint32_t s1 =
                rotr(w[t - 2], 17) ^ rotr(w[t - 2], 19) ^ (w[t - 2] >> 10);
            w[t] = w[t - 16] + s0 + w[t - 7] + s1;
        }
        uint32_t a = h[0], b = h[1], c = h[2], d = h[3];
        uint32_t e = h[4], f = h[5], g = h[6], hh = h[7];
        for (int t = 0; t < 64; ++t) {
            const uint32_t s1 = rotr(e, 6) ^ rotr(e, 11) ^ rotr(e, 25);
            const uint32_t ch = (e & f) ^ (~e & g);
            const uint32_t temp1 = hh + s1 + ch + kSha256K[t] + w[t];
            const uint32_t s0 = rotr(a, 2) ^ rotr(a, 13) ^ rotr(a, 22);
            const uint32_t maj = (a & b) ^ (a & c) ^ (b & c);
            const uint32_t temp2 = s0 + maj;
            hh = g;
            g = f;
            f = e;
            e = d + temp1;
            d = c;
            c = b;
            b = a;
            a = temp1 + temp2;
        }
        h[0] += a;
        h[1] += b;
        h[2] += c;
        h[3] += d;
        h[4] += e;
        h[5] += f;
        h[6] += g;
        h[7] += hh;
    }

    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(64);
    for (uint32_t word : h) {
        for (int i = 7; i >= 0; --i)
            out.push_back(hex[(word >> (4 * i)) & 0xf]);
    }
    return out;
}

std::optional<std::string> base85_decode(std::string_view text) {
    std::array<int, 256> rev;
    rev.fill(-1);
    for (size_t i = 0; i < kBase85Alphabet.size(); ++i)
        rev[static_cast<unsigned char>(kBase85Alphabet[i])] =
            static_cast<int>(i);

    if (text.empty()) return std::string{};
    const size_t pad = (5 - text.size() % 5) % 5;
    if (pad == 4) return std::nullopt;  // a lone trailing char is corrupt

    std::string padded(text);
    padded.append(pad, '~');

    std::string out;
    out.reserve(padded.size() / 5 * 4);
    for (size_t i = 0; i < padded.size(); i += 5) {
        uint64_t acc = 0;
        for (size_t j = 0; j < 5; ++j) {
            const int v = rev[static_cast<unsigned char>(padded[i + j])];
            if (v < 0) return std::nullopt;
            acc = acc * 85 + static_cast<uint64_t>(v);
        }
        if (acc > 0xffffffffULL) return std::nullopt;
        for (int shift = 24; shift >= 0; shift -= 8)
            out.push_back(static_cast<char>((acc >> shift) & 0xff));
    }
    out.resize(out.size() - pad);
    return out;
}

namespace {

struct Value {
    bool is_int = true;
    long long i = 0;
    double d = 0.0;

    double as_double() const { return is_int ? static_cast<double>(i) : d; }
};

struct Parser {
    std::string_view s;
    size_t pos = 0;
    bool failed = false;
    std::string error;

    void fail(const std::string& msg) {
        if (!failed) {
            failed = true;
            error = msg;
        }
    }

    void skip_ws() {
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos])))
            ++pos;
    }

    bool peek_is(char c) {
        skip_ws();
        return pos < s.size() && s[pos] == c;
    }

    bool consume(char c) {
        if (peek_is(c)) {
            ++pos;
            return true;
        }
        return false;
    }

    Value parse_expr() {
        Value left = parse_term();
        while (!failed) {
            skip_ws();
            if (pos >= s.size()) break;
            const char op = s[pos];
            if (op != '+' && op != '-') break;
            ++pos;
            Value right = parse_term();
            left = apply(left, right, op);
        }
        return left;
    }

    Value parse_term() {
        Value left = parse_factor();
        while (!failed) {
            skip_ws();
            if (pos >= s.size()) break;
            const char op = s[pos];
            if (op != '*' && op != '/') break;
            ++pos;
            Value right = parse_factor();
            left = apply(left, right, op);
        }
        return left;
    }

    Value parse_factor() {
        skip_ws();
        if (consume('-')) {
            Value v = parse_factor();
            if (v.is_int)
                v.i = -v.i;
            else
                v.d = -v.d;
            return v;
        }
        if (consume('(')) {
            Value v = parse_expr();
            if (!consume(')')) fail("missing ')'");
            return v;
        }
        return parse_number();
    }

    Value parse_number() {
        skip_ws();
        const size_t start = pos;
        bool saw_dot = false;
        while (pos < s.size() &&
               (std::isdigit(static_cast<unsigned char>(s[pos])) ||
                s[pos] == '.')) {
            if (s[pos] == '.') saw_dot = true;
            ++pos;
        }
        if (pos == start) {
            fail("expected number");
            return {};
        }
        const std::string_view tok = s.substr(start, pos - start);
        Value v;
        if (saw_dot) {
            v.is_int = false;
            v.d = std::strtod(std::string(tok).c_str(), nullptr);
        } else {
            auto [p, ec] = std::from_chars(tok.begin(), tok.end(), v.i);
            if (ec != std::errc{}) {
                v.is_int = false;
                v.d = std::strtod(std::string(tok).c_str(), nullptr);
            }
        }
        return v;
    }

    Value apply(Value a, Value b, char op) {
        Value out;
        if (op == '/') {
            out.is_int = false;
            out.d = a.as_double() / b.as_double();
            return out;
        }
        if (a.is_int && b.is_int) {
            long long r = 0;
            bool overflow = false;
            switch (op) {
                case '+': overflow = __builtin_add_overflow(a.i, b.i, &r); break;
                case '-': overflow = __builtin_sub_overflow(a.i, b.i, &r); break;
                case '*': overflow = __builtin_mul_overflow(a.i, b.i, &r); break;
                default: fail("bad operator"); return out;
            }
            if (!overflow) {
                out.is_int = true;
                out.i = r;
                return out;
            }
        }
        out.is_int = false;
        switch (op) {
            case '+': out.d = a.as_double() + b.as_double(); break;
            case '-': out.d = a.as_double() - b.as_double(); break;
            case '*': out.d = a.as_double() * b.as_double(); break;
            default: fail("bad operator");
        }
        return out;
    }
};

}  // namespace

EvalResult eval_arithmetic(std::string_view expr) {
    Parser p{expr};
    const Value v = p.parse_expr();
    p.skip_ws();
    EvalResult res;
    if (p.failed || p.pos != p.s.size()) {
        res.ok = false;
        res.error = p.failed ? p.error : "trailing input";
        return res;
    }
    res.ok = true;
    res.is_int = v.is_int;
    res.int_value = v.i;
    res.dbl_value = v.as_double();
    return res;
}

std::string format_number(const EvalResult& value) {
    if (!value.ok) return "";
    if (value.is_int) return std::to_string(value.int_value);

    const double d = value.dbl_value;
    if (std::isnan(d)) return "nan";
    if (std::isinf(d)) return d > 0 ? "inf" : "-inf";

    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), d);
    std::string out(buf, ptr);
    if (out.find('.') == std::string::npos &&
        out.find('e') == std::string::npos &&
        out.find("inf") == std::string::npos &&
        out.find("nan") == std::string::npos) {
        out += ".0";
    }
    return out;
}

}  // namespace llmsec::probes
