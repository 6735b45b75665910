package textkit;

public class WordCounter {
    public int countWords(String text) {
        int count = 0;
        boolean inWord = false;
        for (int i = 0; i < text.length(); i++) {
            char c = text.charAt(i);
            boolean letter = Character.isLetter(c);
            if (letter && !inWord) {
                count++;
            }
            inWord = letter;
        }
        return count;
    }

    public int longestWord(String[] words) {
        int best = 0;
        for (int i = 0; i < words.length; i++) {
            int len = words[i].length();
            if (len > best) {
                best = len;
            }
        }
        return best;
    }

    public int averageLength(String[] words) {
        int total = 0;
        for (int i = 0; i < words.length; i++) {
            total = total + words[i].length();
        }
        if (words.length == 0) {
            return 0;
        }
        return total / words.length;
    }

    public boolean isShort(String word, int limit) {
        int len = word.length();
        return len < limit;
    }
}
