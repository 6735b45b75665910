package geometry;

import java.util.ArrayList;
import java.util.List;

public class Polygon {
    private final List<Vec2> points = new ArrayList<>();

    public void add(Vec2 p) {
        points.add(p);
    }

    public int size() {
        return points.size();
    }

    public double signedArea(double[] xs, double[] ys) {
        double sum = 0.0;
        int n = xs.length;
        for (int i = 0; i < n; i++) {
            int j = (i + 1) % n;
            double cross = xs[i] * ys[j] - xs[j] * ys[i];
            sum += cross;
        }
        return sum / 2.0;
    }

    public int countAbove(int[] values, int threshold) {
        int count = 0;
        for (int i = 0; i < values.length; i++) {
            if (values[i] > threshold) {
                count++;
            }
        }
        return count;
    }

    public long weightedSum(int[] values, int weight) {
        long total = 0;
        for (int i = 0; i < values.length; i++) {
            long term = values[i] * weight;
            total = total + term;
        }
        return total;
    }

    public int clampIndex(int index, int length) {
        int last = length - 1;
        if (index < 0) {
            return 0;
        }
        if (index > last) {
            return last;
        }
        return index;
    }
}
