package imaging;

public class Pixels {
    private final int width;
    private final int height;
    private final int[] data;

    public Pixels(int width, int height) {
        this.width = width;
        this.height = height;
        this.data = new int[width * height];
    }

    public int get(int x, int y) {
        int index = y * width + x;
        return data[index];
    }

    public void set(int x, int y, int value) {
        if (x >= 0 && x < width && y >= 0 && y < height) {
            data[y * width + x] = value;
        }
    }

    public int brightness(int rgb) {
        int r = (rgb / 65536) % 256;
        int g = (rgb / 256) % 256;
        int b = rgb % 256;
        return (r + g + b) / 3;
    }

    public int countBright(int threshold) {
        int count = 0;
        for (int i = 0; i < data.length; i++) {
            if (brightness(data[i]) > threshold) {
                count++;
            }
        }
        return count;
    }

    public int average() {
        long sum = 0;
        for (int i = 0; i < data.length; i++) {
            sum = sum + brightness(data[i]);
        }
        return (int) (sum / data.length);
    }
}
