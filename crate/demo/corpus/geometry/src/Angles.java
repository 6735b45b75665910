package geometry;

public final class Angles {
    private Angles() {
    }

    public static double toRadians(double degrees) {
        double factor = Math.PI / 180.0;
        return degrees * factor;
    }

    public static int normalize(int degrees) {
        int d = degrees % 360;
        if (d < 0) {
            d = d + 360;
        }
        return d;
    }

    public static boolean isAcute(int degrees) {
        int d = normalize(degrees);
        return d > 0 && d < 90;
    }

    public static int difference(int a, int b) {
        int diff = normalize(a - b);
        if (diff > 180) {
            diff = 360 - diff;
        }
        return diff;
    }

    public static int sector(int degrees, int sectors) {
        int width = 360 / sectors;
        int d = normalize(degrees);
        return d / width;
    }
}
