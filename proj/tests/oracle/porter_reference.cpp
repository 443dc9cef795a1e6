#include "porter_reference.hpp"

#include <cstring>

namespace porter_reference {

// The working state mirrors the reference C code: b holds the word,
// k is the offset to its end, j is set by ends().
namespace {

struct St {
    char b[256];
    int k;
    int j;
};

int cons(St* z, int i) {
    switch (z->b[i]) {
        case 'a': case 'e': case 'i': case 'o': case 'u': return 0;
        case 'y': return (i == 0) ? 1 : !cons(z, i - 1);
        default: return 1;
    }
}

int m(St* z) {
    int n = 0;
    int i = 0;
    const int j = z->j;
    while (1) {
        if (i > j) return n;
        if (!cons(z, i)) break;
        i++;
    }
    i++;
    while (1) {
        while (1) {
            if (i > j) return n;
            if (cons(z, i)) break;
            i++;
        }
        i++;
        n++;
        while (1) {
            if (i > j) return n;
            if (!cons(z, i)) break;
            i++;
        }
        i++;
    }
}

int vowelinstem(St* z) {
    for (int i = 0; i <= z->j; i++) {
        if (!cons(z, i)) return 1;
    }
    return 0;
}

int doublec(St* z, int j) {
    if (j < 1) return 0;
    if (z->b[j] != z->b[j - 1]) return 0;
    return cons(z, j);
}

int cvc(St* z, int i) {
    if (i < 2 || !cons(z, i) || cons(z, i - 1) || !cons(z, i - 2)) return 0;
    const int ch = z->b[i];
    if (ch == 'w' || ch == 'x' || ch == 'y') return 0;
    return 1;
}

// s is length-prefixed as in the reference code
int ends(St* z, const char* s) {
    const int length = s[0];
    if (s[length] != z->b[z->k]) return 0;
    if (length > z->k + 1) return 0;
    if (std::memcmp(z->b + z->k - length + 1, s + 1, (size_t)length) != 0) return 0;
    z->j = z->k - length;
    return 1;
}

void setto(St* z, const char* s) {
    const int length = s[0];
    std::memmove(z->b + z->j + 1, s + 1, (size_t)length);
    z->k = z->j + length;
}

void r(St* z, const char* s) {
    if (m(z) > 0) setto(z, s);
}

void step1ab(St* z) {
    if (z->b[z->k] == 's') {
        if (ends(z, "\04" "sses")) {
            z->k -= 2;
        } else if (ends(z, "\03" "ies")) {
            setto(z, "\01" "i");
        } else if (z->b[z->k - 1] != 's') {
            z->k--;
        }
    }
    if (ends(z, "\03" "eed")) {
        if (m(z) > 0) z->k--;
    } else if ((ends(z, "\02" "ed") || ends(z, "\03" "ing")) && vowelinstem(z)) {
        z->k = z->j;
        if (ends(z, "\02" "at")) {
            setto(z, "\03" "ate");
        } else if (ends(z, "\02" "bl")) {
            setto(z, "\03" "ble");
        } else if (ends(z, "\02" "iz")) {
            setto(z, "\03" "ize");
        } else if (doublec(z, z->k)) {
            z->k--;
            const int ch = z->b[z->k];
            if (ch == 'l' || ch == 's' || ch == 'z') z->k++;
        } else if (m(z) == 1 && cvc(z, z->k)) {
            setto(z, "\01" "e");
        }
    }
}

void step1c(St* z) {
    if (ends(z, "\01" "y") && z->j > 0 && cons(z, z->j)) z->b[z->k] = 'i';
}

void step2(St* z) {
    switch (z->b[z->k - 1]) {
        case 'a':
            if (ends(z, "\07" "ational")) { r(z, "\03" "ate"); break; }
            if (ends(z, "\06" "tional")) { r(z, "\04" "tion"); break; }
            break;
        case 'c':
            if (ends(z, "\04" "enci")) { r(z, "\04" "ence"); break; }
            if (ends(z, "\04" "anci")) { r(z, "\04" "ance"); break; }
            break;
        case 'e':
            if (ends(z, "\04" "izer")) { r(z, "\03" "ize"); break; }
            break;
        case 'l':
            if (ends(z, "\03" "bli")) { r(z, "\03" "ble"); break; }
            if (ends(z, "\04" "alli")) { r(z, "\02" "al"); break; }
            if (ends(z, "\05" "entli")) { r(z, "\03" "ent"); break; }
            if (ends(z, "\03" "eli")) { r(z, "\01" "e"); break; }
            if (ends(z, "\05" "ousli")) { r(z, "\03" "ous"); break; }
            break;
        case 'o':
            if (ends(z, "\07" "ization")) { r(z, "\03" "ize"); break; }
            if (ends(z, "\05" "ation")) { r(z, "\03" "ate"); break; }
            if (ends(z, "\04" "ator")) { r(z, "\03" "ate"); break; }
            break;
        case 's':
            if (ends(z, "\05" "alism")) { r(z, "\02" "al"); break; }
            if (ends(z, "\07" "iveness")) { r(z, "\03" "ive"); break; }
            if (ends(z, "\07" "fulness")) { r(z, "\03" "ful"); break; }
            if (ends(z, "\07" "ousness")) { r(z, "\03" "ous"); break; }
            break;
        case 't':
            if (ends(z, "\05" "aliti")) { r(z, "\02" "al"); break; }
            if (ends(z, "\05" "iviti")) { r(z, "\03" "ive"); break; }
            if (ends(z, "\06" "biliti")) { r(z, "\03" "ble"); break; }
            break;
        case 'g':
            if (ends(z, "\04" "logi")) { r(z, "\03" "log"); break; }
            break;
    }
}

void step3(St* z) {
    switch (z->b[z->k]) {
        case 'e':
            if (ends(z, "\05" "icate")) { r(z, "\02" "ic"); break; }
            if (ends(z, "\05" "ative")) { r(z, "\00" ""); break; }
            if (ends(z, "\05" "alize")) { r(z, "\02" "al"); break; }
            break;
        case 'i':
            if (ends(z, "\05" "iciti")) { r(z, "\02" "ic"); break; }
            break;
        case 'l':
            if (ends(z, "\04" "ical")) { r(z, "\02" "ic"); break; }
            if (ends(z, "\03" "ful")) { r(z, "\00" ""); break; }
            break;
        case 's':
            if (ends(z, "\04" "ness")) { r(z, "\00" ""); break; }
            break;
    }
}

void step4(St* z) {
    switch (z->b[z->k - 1]) {
        case 'a':
            if (ends(z, "\02" "al")) break;
            return;
        case 'c':
            if (ends(z, "\04" "ance")) break;
            if (ends(z, "\04" "ence")) break;
            return;
        case 'e':
            if (ends(z, "\02" "er")) break;
            return;
        case 'i':
            if (ends(z, "\02" "ic")) break;
            return;
        case 'l':
            if (ends(z, "\04" "able")) break;
            if (ends(z, "\04" "ible")) break;
            return;
        case 'n':
            if (ends(z, "\03" "ant")) break;
            if (ends(z, "\05" "ement")) break;
            if (ends(z, "\04" "ment")) break;
            if (ends(z, "\03" "ent")) break;
            return;
        case 'o':
            if (ends(z, "\03" "ion") && (z->b[z->j] == 's' || z->b[z->j] == 't')) break;
            if (ends(z, "\02" "ou")) break;
            return;
        case 's':
            if (ends(z, "\03" "ism")) break;
            return;
        case 't':
            if (ends(z, "\03" "ate")) break;
            if (ends(z, "\03" "iti")) break;
            return;
        case 'u':
            if (ends(z, "\03" "ous")) break;
            return;
        case 'v':
            if (ends(z, "\03" "ive")) break;
            return;
        case 'z':
            if (ends(z, "\03" "ize")) break;
            return;
        default:
            return;
    }
    if (m(z) > 1) z->k = z->j;
}

void step5(St* z) {
    z->j = z->k;
    if (z->b[z->k] == 'e') {
        const int a = m(z);
        if (a > 1 || (a == 1 && !cvc(z, z->k - 1))) z->k--;
    }
    if (z->b[z->k] == 'l' && doublec(z, z->k) && m(z) > 1) z->k--;
}

}  // namespace

std::string stem(const std::string& word) {
    if (word.size() <= 2 || word.size() >= 255) return word;
    St z;
    std::memcpy(z.b, word.data(), word.size());
    z.b[word.size()] = 0;
    z.k = (int)word.size() - 1;
    z.j = 0;
    step1ab(&z);
    step1c(&z);
    step2(&z);
    step3(&z);
    step4(&z);
    step5(&z);
    return std::string(z.b, (size_t)(z.k + 1));
}

}  // namespace porter_reference
