package scheduler;

public class Planner {
    private final int slots;
    private final int[] load;

    public Planner(int slots) {
        this.slots = slots;
        this.load = new int[slots];
    }

    public int leastLoaded() {
        int best = 0;
        for (int i = 1; i < slots; i++) {
            if (load[i] < load[best]) {
                best = i;
            }
        }
        return best;
    }

    public void assign(int slot, int work) {
        if (slot >= 0 && slot < slots) {
            load[slot] = load[slot] + work;
        }
    }

    public int totalLoad() {
        int total = 0;
        for (int i = 0; i < slots; i++) {
            total += load[i];
        }
        return total;
    }

    public int imbalance() {
        int max = 0;
        int min = Integer.MAX_VALUE;
        for (int i = 0; i < slots; i++) {
            if (load[i] > max) {
                max = load[i];
            }
            if (load[i] < min) {
                min = load[i];
            }
        }
        return max - min;
    }
}
