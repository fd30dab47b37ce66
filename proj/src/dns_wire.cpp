#include "hometap/dns_wire.hpp"

#include <algorithm>
#include <cctype>
#include <optional>
#include <set>
#include <string>
#include <utility>

namespace hometap::dns {

namespace {

constexpr std::uint16_t kTypeA = 1;
constexpr std::uint16_t kTypeCname = 5;
constexpr std::uint16_t kClassIn = 1;

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> msg) : msg_(msg) {}

    bool ok() const { return ok_; }
    std::size_t pos() const { return pos_; }
    void seek(std::size_t p) { pos_ = p; }

    std::uint16_t u16() {
        if (!need(2)) return 0;
        std::uint16_t v = static_cast<std::uint16_t>((msg_[pos_] << 8) | msg_[pos_ + 1]);
        pos_ += 2;
        return v;
    }
    std::uint32_t u32() {
        std::uint32_t hi = u16();
        return (hi << 16) | u16();
    }
    void skip(std::size_t n) {
        if (need(n)) pos_ += n;
    }

    // Reads a possibly compressed name starting at the cursor.
    std::string name() {
        std::string out;
        std::size_t p = pos_;
        std::optional<std::size_t> resume;
        int jumps = 0;
        while (true) {
            if (p >= msg_.size()) return fail();
            std::uint8_t len = msg_[p];
            if ((len & 0xc0) == 0xc0) {
                if (p + 1 >= msg_.size() || ++jumps > 32) return fail();
                if (!resume) resume = p + 2;
                p = static_cast<std::size_t>(((len & 0x3f) << 8) | msg_[p + 1]);
                continue;
            }
            if ((len & 0xc0) != 0) return fail();
            ++p;
            if (len == 0) break;
            if (p + len > msg_.size()) return fail();
            if (!out.empty()) out.push_back('.');
            for (std::size_t i = 0; i < len; ++i) {
                out.push_back(static_cast<char>(std::tolower(msg_[p + i])));
            }
            p += len;
            if (out.size() > 255) return fail();
        }
        pos_ = resume ? *resume : p;
        return out;
    }

private:
    bool need(std::size_t n) {
        if (pos_ + n > msg_.size()) ok_ = false;
        return ok_;
    }
    std::string fail() {
        ok_ = false;
        return {};
    }

    std::span<const std::uint8_t> msg_;
    std::size_t pos_ = 0;
    bool ok_ = true;
};

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put_name(std::vector<std::uint8_t>& out, const std::string& name) {
    std::size_t start = 0;
    while (start <= name.size()) {
        auto dot = name.find('.', start);
        if (dot == std::string::npos) dot = name.size();
        auto len = dot - start;
        if (len == 0 || len > 63) throw InputError("cannot encode dns name '" + name + "'");
        out.push_back(static_cast<std::uint8_t>(len));
        out.insert(out.end(), name.begin() + static_cast<std::ptrdiff_t>(start),
                   name.begin() + static_cast<std::ptrdiff_t>(dot));
        start = dot + 1;
    }
    out.push_back(0);
}

}  // namespace

Decoded decode_response(std::span<const std::uint8_t> message) {
    Reader r(message);
    r.skip(2);  // id
    std::uint16_t flags = r.u16();
    std::uint16_t qdcount = r.u16();
    std::uint16_t ancount = r.u16();
    r.skip(4);  // nscount, arcount
    if (!r.ok()) return {};
    if ((flags & 0x8000) == 0) return {Status::NotResponse, {}};
    if (qdcount == 0) return {};

    std::string qname = r.name();
    r.skip(4);
    for (std::uint16_t i = 1; i < qdcount && r.ok(); ++i) {
        r.name();
        r.skip(4);
    }
    if (!r.ok() || qname.empty()) return {};

    struct Record {
        std::string owner;
        std::uint16_t type;
        std::string target;
        Ipv4 addr;
    };
    std::vector<Record> records;
    for (std::uint16_t i = 0; i < ancount; ++i) {
        Record rec;
        rec.owner = r.name();
        rec.type = r.u16();
        std::uint16_t klass = r.u16();
        r.u32();  // ttl
        std::uint16_t rdlen = r.u16();
        if (!r.ok()) return {};
        std::size_t rdata = r.pos();
        if (rdata + rdlen > message.size()) return {};
        if (rec.type == kTypeA && klass == kClassIn) {
            if (rdlen != 4) return {};
            rec.addr = Ipv4(r.u32());
        } else if (rec.type == kTypeCname) {
            rec.target = r.name();
            if (!r.ok()) return {};
        }
        r.seek(rdata + rdlen);
        records.push_back(std::move(rec));
    }

    // CNAME closure from the query name; order-independent fixpoint.
    std::set<std::string> names{qname};
    for (bool grew = true; grew;) {
        grew = false;
        for (const auto& rec : records) {
            if (rec.type == kTypeCname && names.count(rec.owner) && names.insert(rec.target).second) grew = true;
        }
    }

    Decoded out{Status::NoAnswer, DnsAnswer{qname, {}}};
    for (const auto& rec : records) {
        if (rec.type == kTypeA && names.count(rec.owner)) out.answer.answers.push_back(rec.addr);
    }
    auto& ans = out.answer.answers;
    std::sort(ans.begin(), ans.end());
    ans.erase(std::unique(ans.begin(), ans.end()), ans.end());
    if (!ans.empty()) out.status = Status::Answer;
    return out;
}

std::vector<std::uint8_t> encode_response(const DnsAnswer& answer) {
    std::vector<std::uint8_t> out;
    out.reserve(encoded_size(answer));
    put16(out, 0);       // id
    put16(out, 0x8180);  // standard response, recursion available
    put16(out, 1);
    put16(out, static_cast<std::uint16_t>(answer.answers.size()));
    put16(out, 0);
    put16(out, 0);
    put_name(out, answer.query);
    put16(out, kTypeA);
    put16(out, kClassIn);
    for (const auto& ip : answer.answers) {
        put16(out, 0xc00c);
        put16(out, kTypeA);
        put16(out, kClassIn);
        put16(out, 0);
        put16(out, 300);
        put16(out, 4);
        put16(out, static_cast<std::uint16_t>(ip.value >> 16));
        put16(out, static_cast<std::uint16_t>(ip.value));
    }
    return out;
}

std::size_t encoded_size(const DnsAnswer& answer) {
    return 12 + answer.query.size() + 2 + 4 + 16 * answer.answers.size();
}

}  // namespace hometap::dns
