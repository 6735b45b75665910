package textkit;

public class Caesar {
    private final int shift;

    public Caesar(int shift) {
        this.shift = shift % 26;
    }

    public char encode(char c) {
        if (c >= 'a' && c <= 'z') {
            int offset = c - 'a';
            int moved = (offset + shift) % 26;
            return (char) ('a' + moved);
        }
        return c;
    }

    public String encodeAll(String text) {
        StringBuilder sb = new StringBuilder();
        for (int i = 0; i < text.length(); i++) {
            sb.append(encode(text.charAt(i)));
        }
        return sb.toString();
    }

    public int score(String text) {
        int vowels = 0;
        int others = 0;
        for (int i = 0; i < text.length(); i++) {
            char c = text.charAt(i);
            if (c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u') {
                vowels = vowels + 1;
            } else {
                others = others + 1;
            }
        }
        return vowels * 2 - others;
    }
}
