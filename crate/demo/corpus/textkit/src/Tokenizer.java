package textkit;

import java.util.ArrayList;
import java.util.List;

public class Tokenizer {
    private final String input;
    private int pos;

    public Tokenizer(String input) {
        this.input = input;
    }

    public boolean hasNext() {
        skipSpaces();
        return pos < input.length();
    }

    private void skipSpaces() {
        while (pos < input.length() && input.charAt(pos) == ' ') {
            pos++;
        }
    }

    public String next() {
        skipSpaces();
        int start = pos;
        while (pos < input.length() && input.charAt(pos) != ' ') {
            pos++;
        }
        return input.substring(start, pos);
    }

    public List<String> all() {
        List<String> out = new ArrayList<>();
        while (hasNext()) {
            out.add(next());
        }
        return out;
    }

    public int remaining() {
        int len = input.length();
        return len - pos;
    }
}
