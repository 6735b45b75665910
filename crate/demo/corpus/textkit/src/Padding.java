package textkit;

public final class Padding {
    private Padding() {
    }

    public static String left(String s, int width) {
        StringBuilder sb = new StringBuilder();
        int pad = width - s.length();
        for (int i = 0; i < pad; i++) {
            sb.append(' ');
        }
        sb.append(s);
        return sb.toString();
    }

    public static String right(String s, int width) {
        StringBuilder sb = new StringBuilder(s);
        while (sb.length() < width) {
            sb.append(' ');
        }
        return sb.toString();
    }

    public static String center(String s, int width) {
        int total = width - s.length();
        int before = total / 2;
        int after = total - before;
        return repeat(' ', before) + s + repeat(' ', after);
    }

    public static String repeat(char c, int n) {
        StringBuilder sb = new StringBuilder();
        for (int i = 0; i < n; i++) {
            sb.append(c);
        }
        return sb.toString();
    }
}
