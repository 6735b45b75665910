package imaging;

public class Histogram {
    private final int[] bins;

    public Histogram(int size) {
        bins = new int[size];
    }

    public void add(int value, int max) {
        int index = value * bins.length / (max + 1);
        if (index >= 0 && index < bins.length) {
            bins[index] = bins[index] + 1;
        }
    }

    public int peak() {
        int best = 0;
        for (int i = 1; i < bins.length; i++) {
            if (bins[i] > bins[best]) {
                best = i;
            }
        }
        return best;
    }

    public int total() {
        int sum = 0;
        for (int i = 0; i < bins.length; i++) {
            sum = sum + bins[i];
        }
        return sum;
    }

    public int median() {
        int half = total() / 2;
        int running = 0;
        for (int i = 0; i < bins.length; i++) {
            running = running + bins[i];
            if (running > half) {
                return i;
            }
        }
        return bins.length - 1;
    }

    public double spread(int low, int high) {
        int inside = 0;
        for (int i = low; i <= high && i < bins.length; i++) {
            inside = inside + bins[i];
        }
        int all = total();
        return all == 0 ? 0.0 : inside * 1.0 / all;
    }
}
